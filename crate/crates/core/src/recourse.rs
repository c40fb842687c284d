//! Closed-form second stage.
//!
//! For a fixed schedule the recourse LP separates by block, and each block's
//! optimum is `(max(0, load - L), max(0, L - load))`. The same pair is used
//! when the idle rate is zero and the LP optimum is not unique.

use surgdro_milp::Scalar;

use crate::domain::{BlockOutcome, Instance, Schedule, Scenario, Target};
use crate::error::CoreError;

/// Canonical `(overtime, idle)` for one block.
pub fn canonical_overtime_idle<S: Scalar>(load: S, length: S) -> Result<(S, S), CoreError> {
    if load < S::zero() {
        return Err(CoreError::NegativeLoad(load.to_f64_lossy()));
    }
    let delta = load - length;
    if delta > S::zero() {
        Ok((delta, S::zero()))
    } else {
        Ok((S::zero(), -delta))
    }
}

/// Elective plus emergency load of every block; `None` for closed blocks.
pub fn block_loads(inst: &Instance, sched: &Schedule, scen: &Scenario) -> Vec<Option<f64>> {
    let mut loads: Vec<Option<f64>> = (0..inst.num_blocks())
        .map(|b| sched.is_open(b).then_some(scen.e[b]))
        .collect();
    for (i, t) in sched.assignment.iter().enumerate() {
        if let Target::Block(b) = *t {
            if let Some(l) = loads[b].as_mut() {
                *l += scen.d[i];
            }
        }
    }
    loads
}

pub fn block_outcomes(
    inst: &Instance,
    sched: &Schedule,
    scen: &Scenario,
) -> Result<Vec<Option<BlockOutcome>>, CoreError> {
    block_loads(inst, sched, scen)
        .into_iter()
        .zip(&inst.blocks)
        .map(|(load, k)| {
            load.map(|load| {
                let (overtime, idle) = canonical_overtime_idle(load, k.length)?;
                Ok(BlockOutcome { load, overtime, idle })
            })
            .transpose()
        })
        .collect()
}

/// Second-stage cost in scalar `S`; inputs are converted with
/// [`Scalar::from_f64_lossy`].
pub fn recourse_cost_in<S: Scalar>(
    inst: &Instance,
    sched: &Schedule,
    scen: &Scenario,
) -> Result<S, CoreError> {
    sched.check(inst)?;
    if scen.d.len() != inst.num_surgeries() || scen.e.len() != inst.num_blocks() {
        return Err(CoreError::Shape("scenario does not match instance".into()));
    }
    let mut loads: Vec<Option<S>> = (0..inst.num_blocks())
        .map(|b| sched.is_open(b).then(|| S::from_f64_lossy(scen.e[b])))
        .collect();
    for (i, t) in sched.assignment.iter().enumerate() {
        if let Target::Block(b) = *t {
            if let Some(l) = loads[b].as_mut() {
                *l = l.clone() + S::from_f64_lossy(scen.d[i]);
            }
        }
    }
    let mut total = S::zero();
    for (load, k) in loads.into_iter().zip(&inst.blocks) {
        if let Some(load) = load {
            let (o, g) = canonical_overtime_idle(load, S::from_f64_lossy(k.length))?;
            total = total
                + S::from_f64_lossy(k.overtime_rate) * o
                + S::from_f64_lossy(k.idle_rate) * g;
        }
    }
    Ok(total)
}

pub fn recourse_cost(inst: &Instance, sched: &Schedule, scen: &Scenario) -> Result<f64, CoreError> {
    recourse_cost_in(inst, sched, scen)
}

/// Patient costs plus, for block allocation, the opening costs.
pub fn first_stage_cost_in<S: Scalar>(inst: &Instance, sched: &Schedule) -> Result<S, CoreError> {
    sched.check(inst)?;
    let mut total = S::zero();
    for (s, t) in inst.surgeries.iter().zip(&sched.assignment) {
        let c = match t {
            Target::Block(_) => s.schedule_cost,
            Target::Reject => s.reject_cost,
        };
        total = total + S::from_f64_lossy(c);
    }
    if let Some(open) = &sched.open_blocks {
        for &b in open {
            total = total + S::from_f64_lossy(inst.blocks[b].open_cost);
        }
    }
    Ok(total)
}

pub fn first_stage_cost(inst: &Instance, sched: &Schedule) -> Result<f64, CoreError> {
    first_stage_cost_in(inst, sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::single_block as tiny;

    fn scen(d: f64, e: f64) -> Scenario {
        Scenario { d: vec![d], e: vec![e] }
    }

    #[test]
    fn overtime_idle_examples() {
        assert_eq!(canonical_overtime_idle(540.0, 480.0).unwrap(), (60.0, 0.0));
        assert_eq!(canonical_overtime_idle(180.0, 480.0).unwrap(), (0.0, 300.0));
        assert_eq!(canonical_overtime_idle(480.0, 480.0).unwrap(), (0.0, 0.0));
        assert!(canonical_overtime_idle(-1.0, 480.0).is_err());
    }

    #[test]
    fn recourse_examples() {
        let inst = tiny();
        let on = Schedule::new(vec![Target::Block(0)]);
        let off = Schedule::all_rejected(1);
        assert!((recourse_cost(&inst, &on, &scen(300.0, 240.0)).unwrap() - 1560.0).abs() < 1e-9);
        assert!((recourse_cost(&inst, &on, &scen(120.0, 60.0)).unwrap() - 5200.0).abs() < 1e-9);
        assert!((recourse_cost(&inst, &off, &scen(120.0, 60.0)).unwrap() - 7280.0).abs() < 1e-9);
    }

    #[test]
    fn closed_blocks_cost_nothing() {
        let inst = tiny();
        let mut s = Schedule::all_rejected(1);
        s.open_blocks = Some(Default::default());
        assert_eq!(recourse_cost(&inst, &s, &scen(120.0, 60.0)).unwrap(), 0.0);
    }

    #[test]
    fn incompatible_assignment_is_rejected() {
        let inst = tiny();
        let s = Schedule::new(vec![Target::Block(1)]);
        assert!(recourse_cost(&inst, &s, &scen(120.0, 60.0)).is_err());
    }

    #[test]
    fn first_stage_examples() {
        let mut inst = tiny();
        assert_eq!(first_stage_cost(&inst, &Schedule::new(vec![Target::Block(0)])).unwrap(), 100.0);
        assert_eq!(first_stage_cost(&inst, &Schedule::all_rejected(1)).unwrap(), 500.0);
        inst.blocks[0].open_cost = 800.0;
        let mut s = Schedule::new(vec![Target::Block(0)]);
        s.open_blocks = Some([0].into_iter().collect());
        assert_eq!(first_stage_cost(&inst, &s).unwrap(), 900.0);
    }
}
