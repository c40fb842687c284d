//! Brute-force reference values for every reformulation step.
//!
//! Nothing here uses the model builders; each quantity is computed straight
//! from its definition by enumeration or a small explicit LP.

use std::collections::BTreeSet;

use surgdro_milp::{solve_lp, LpStatus, MilpModel, RowSense};

use crate::domain::{Instance, Schedule, Target};
use crate::error::CoreError;
use crate::ingest::ScenarioSet;
use crate::recourse::{first_stage_cost, recourse_cost};

/// Largest assignment count [`exhaustive_best_schedule`] will enumerate.
pub const MAX_ENUMERATION: u128 = 100_000;

/// Default upper end of the dual search interval: the largest cost rate.
pub fn rho_cap(inst: &Instance) -> f64 {
    inst.blocks.iter().map(|k| k.overtime_rate.max(k.idle_rate)).fold(0.0, f64::max)
}

/// `max_v [beta v - rho |v - hat|]` over the three candidates.
fn coord_max(beta: f64, rho: f64, lo: f64, hat: f64, hi: f64) -> f64 {
    [lo, hat, hi]
        .into_iter()
        .map(|v| beta * v - rho * (v - hat).abs())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Inner value of block `b` for the `n`-th sample and one dual extreme `beta`.
fn branch_value(
    inst: &Instance,
    scen: &ScenarioSet,
    n: usize,
    b: usize,
    y: &Schedule,
    rho: f64,
    beta: f64,
) -> Result<f64, CoreError> {
    let s = &scen.scenarios[n];
    let k = &inst.blocks[b];
    let mut v = coord_max(beta, rho, k.e_lo, s.e[b], k.e_hi) - beta * k.length;
    for i in y.in_block(b) {
        let (lo, hi) = inst.d_support(i)?;
        v += coord_max(beta, rho, lo, s.d[i], hi);
    }
    Ok(v)
}

/// Supremum over the support of block `b`'s recourse minus `rho` times the
/// ℓ1 distance to sample `n`, for fixed `y`.
///
/// Each coordinate term is concave piecewise linear with its kink at the
/// sample, so the candidates `{lo, sample, hi}` per coordinate and the two
/// dual extremes `{c_o, -c_g}` suffice.
pub fn inner_sup_bruteforce(
    inst: &Instance,
    scen: &ScenarioSet,
    n: usize,
    b: usize,
    y: &Schedule,
    rho: f64,
) -> Result<f64, CoreError> {
    if rho < 0.0 {
        return Err(CoreError::Config("rho must be nonnegative".into()));
    }
    if !y.is_open(b) {
        return Ok(0.0);
    }
    let k = &inst.blocks[b];
    let over = branch_value(inst, scen, n, b, y, rho, k.overtime_rate)?;
    let idle = branch_value(inst, scen, n, b, y, rho, -k.idle_rate)?;
    Ok(over.max(idle))
}

fn dual_objective(inst: &Instance, scen: &ScenarioSet, epsilon: f64, y: &Schedule, rho: f64) -> Result<f64, CoreError> {
    let mut total = 0.0;
    for n in 0..scen.len() {
        for b in 0..inst.num_blocks() {
            total += inner_sup_bruteforce(inst, scen, n, b, y, rho)?;
        }
    }
    Ok(epsilon * rho + total / scen.len() as f64)
}

/// Candidate dual values: a uniform grid on `[0, cap]` with 100 steps, every
/// cost rate, and every point where a block's two dual branches cross.
///
/// The objective is convex piecewise linear in `rho`; its kinks are the rates
/// and the branch crossings, so the minimum over these candidates is exact.
pub fn rho_candidates(inst: &Instance, scen: &ScenarioSet, y: &Schedule) -> Result<Vec<f64>, CoreError> {
    let cap = rho_cap(inst);
    let mut pts: Vec<f64> = (0..=100).map(|k| cap * k as f64 / 100.0).collect();
    let mut rates = vec![0.0, cap];
    for k in &inst.blocks {
        rates.push(k.overtime_rate);
        rates.push(k.idle_rate);
    }
    pts.extend(&rates);
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    for n in 0..scen.len() {
        for b in 0..inst.num_blocks() {
            if !y.is_open(b) {
                continue;
            }
            let k = &inst.blocks[b];
            let gap = |r: f64| -> Result<f64, CoreError> {
                Ok(branch_value(inst, scen, n, b, y, r, k.overtime_rate)?
                    - branch_value(inst, scen, n, b, y, r, -k.idle_rate)?)
            };
            // Both branches are affine between consecutive rates.
            for w in rates.windows(2) {
                let (l, r) = (w[0], w[1]);
                let (gl, gr) = (gap(l)?, gap(r)?);
                if gl * gr < 0.0 {
                    pts.push(l + gl * (r - l) / (gl - gr));
                }
            }
        }
    }
    pts.retain(|p| (0.0..=cap).contains(p));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(pts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedYValue {
    /// `min_rho eps*rho + (1/N) sum_n sum_b inner_sup`.
    pub value: f64,
    pub rho: f64,
}

/// Worst-case expected recourse of `y` over the Wasserstein ball, through the
/// one-dimensional dual. First-stage cost not included.
pub fn wdro_fixed_y_value(
    inst: &Instance,
    scen: &ScenarioSet,
    epsilon: f64,
    y: &Schedule,
) -> Result<FixedYValue, CoreError> {
    if scen.is_empty() {
        return Err(CoreError::Config("empty scenario set".into()));
    }
    y.check(inst)?;
    let mut best = FixedYValue { value: f64::INFINITY, rho: 0.0 };
    for rho in rho_candidates(inst, scen, y)? {
        let v = dual_objective(inst, scen, epsilon, y, rho)?;
        if v < best.value {
            best = FixedYValue { value: v, rho };
        }
    }
    Ok(best)
}

/// Value of the dual objective at one `rho`, for convexity checks.
pub fn wdro_dual_at(inst: &Instance, scen: &ScenarioSet, epsilon: f64, y: &Schedule, rho: f64) -> Result<f64, CoreError> {
    dual_objective(inst, scen, epsilon, y, rho)
}

/// Largest recourse of `y` over all support corners (the infinite-radius
/// limit).
pub fn worst_case_recourse(inst: &Instance, y: &Schedule) -> Result<f64, CoreError> {
    y.check(inst)?;
    let mut total = 0.0;
    for (b, k) in inst.blocks.iter().enumerate() {
        if !y.is_open(b) {
            continue;
        }
        let mut lo = k.e_lo;
        let mut hi = k.e_hi;
        for i in y.in_block(b) {
            let (dl, dh) = inst.d_support(i)?;
            lo += dl;
            hi += dh;
        }
        let f = |load: f64| (k.overtime_rate * (load - k.length)).max(-k.idle_rate * (load - k.length));
        total += f(lo).max(f(hi));
    }
    Ok(total)
}

/// `first_stage_cost + (1/N) sum_n recourse_cost` in closed form.
pub fn saa_objective_direct(inst: &Instance, scen: &ScenarioSet, y: &Schedule) -> Result<f64, CoreError> {
    if scen.is_empty() {
        return Err(CoreError::Config("empty scenario set".into()));
    }
    let mut total = 0.0;
    for s in &scen.scenarios {
        total += recourse_cost(inst, y, s)?;
    }
    Ok(first_stage_cost(inst, y)? + total / scen.len() as f64)
}

/// Every feasible assignment in lexicographic order of option index, where a
/// surgery's options are its compatible blocks in index order and then
/// rejection.
pub fn enumerate_schedules(inst: &Instance) -> Result<Vec<Schedule>, CoreError> {
    let options: Vec<Vec<Target>> = (0..inst.num_surgeries())
        .map(|i| {
            let mut o: Vec<Target> = inst.compatible_blocks(i).into_iter().map(Target::Block).collect();
            o.push(Target::Reject);
            o
        })
        .collect();
    let count = options.iter().map(|o| o.len() as u128).try_fold(1u128, |a, k| a.checked_mul(k));
    match count {
        Some(c) if c <= MAX_ENUMERATION => {}
        Some(c) => return Err(CoreError::TooLarge(c)),
        None => return Err(CoreError::TooLarge(u128::MAX)),
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; options.len()];
    loop {
        out.push(Schedule::new(idx.iter().zip(&options).map(|(&k, o)| o[k]).collect()));
        // Odometer with the last surgery varying fastest.
        let mut pos = options.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Opens exactly the blocks that receive a surgery. Opening an empty block
/// never lowers cost, so this is the best open set for the assignment.
pub fn with_used_blocks_open(y: &Schedule) -> Schedule {
    let open: BTreeSet<usize> = y.assignment.iter().filter_map(|t| t.block()).collect();
    Schedule { assignment: y.assignment.clone(), open_blocks: Some(open) }
}

#[derive(Debug, Clone)]
pub struct BestSchedule {
    pub schedule: Schedule,
    pub value: f64,
}

/// Global optimum of the Wasserstein model by enumeration. With
/// `allocation`, blocks may also stay closed. Ties go to the first schedule
/// in enumeration order.
pub fn exhaustive_best_schedule(
    inst: &Instance,
    scen: &ScenarioSet,
    epsilon: f64,
    allocation: bool,
) -> Result<BestSchedule, CoreError> {
    let mut best: Option<BestSchedule> = None;
    for y in enumerate_schedules(inst)? {
        let y = if allocation { with_used_blocks_open(&y) } else { y };
        let v = first_stage_cost(inst, &y)? + wdro_fixed_y_value(inst, scen, epsilon, &y)?.value;
        if best.as_ref().is_none_or(|b| v < b.value) {
            best = Some(BestSchedule { schedule: y, value: v });
        }
    }
    Ok(best.expect("at least the all-reject schedule exists"))
}

/// SAA optimum by enumeration.
pub fn exhaustive_best_saa(inst: &Instance, scen: &ScenarioSet) -> Result<BestSchedule, CoreError> {
    let mut best: Option<BestSchedule> = None;
    for y in enumerate_schedules(inst)? {
        let v = saa_objective_direct(inst, scen, &y)?;
        if best.as_ref().is_none_or(|b| v < b.value) {
            best = Some(BestSchedule { schedule: y, value: v });
        }
    }
    Ok(best.expect("at least the all-reject schedule exists"))
}

/// Optimal value of the per-block recourse LP
/// `min c_o o + c_g g  s.t.  o - g = load - L, o, g >= 0`, solved by simplex.
pub fn recourse_lp(inst: &Instance, y: &Schedule, scen: &crate::domain::Scenario) -> Result<f64, CoreError> {
    y.check(inst)?;
    let mut m = MilpModel::<f64>::new("recourse");
    let mut obj = Vec::new();
    for (b, k) in inst.blocks.iter().enumerate() {
        if !y.is_open(b) {
            continue;
        }
        let o = m.add_continuous(format!("o{b}"), Some(0.0), None)?;
        let g = m.add_continuous(format!("g{b}"), Some(0.0), None)?;
        let load: f64 = scen.e[b] + y.in_block(b).map(|i| scen.d[i]).sum::<f64>();
        m.add_constraint(format!("bal{b}"), [(o, 1.0), (g, -1.0)], RowSense::Eq, load - k.length)?;
        obj.push((o, k.overtime_rate));
        obj.push((g, k.idle_rate));
    }
    m.set_objective(obj, 0.0)?;
    let out = solve_lp(&m);
    match out.status {
        LpStatus::Optimal => Ok(out.objective),
        s => Err(CoreError::Config(format!("recourse LP ended with {s:?}"))),
    }
}

/// Worst-case expected recourse of `y` over all distributions on the support
/// box with the instance means, by an explicit LP over the vertices of each
/// block's box.
pub fn mdro_fixed_y_value(inst: &Instance, y: &Schedule) -> Result<f64, CoreError> {
    y.check(inst)?;
    let mut total = 0.0;
    for (b, k) in inst.blocks.iter().enumerate() {
        if !y.is_open(b) {
            continue;
        }
        // Coordinates: scheduled durations then the emergency capacity.
        let mut coords: Vec<(f64, f64, f64)> = Vec::new();
        for i in y.in_block(b) {
            let t = inst.surgery_type(i)?;
            coords.push((t.d_lo, t.mean_duration, t.d_hi));
        }
        coords.push((k.e_lo, k.e_mean, k.e_hi));
        if coords.len() > 14 {
            return Err(CoreError::TooLarge(1u128 << coords.len()));
        }
        let mut m = MilpModel::<f64>::new("moment");
        let nv = 1usize << coords.len();
        let p: Vec<_> = (0..nv)
            .map(|v| m.add_continuous(format!("p{v}"), Some(0.0), None))
            .collect::<Result<_, _>>()?;
        let vertex = |v: usize, c: usize| if v >> c & 1 == 1 { coords[c].2 } else { coords[c].0 };
        m.add_constraint("mass", p.iter().map(|&x| (x, 1.0)), RowSense::Eq, 1.0)?;
        for (c, &(_, mean, _)) in coords.iter().enumerate() {
            m.add_constraint(format!("mean{c}"), (0..nv).map(|v| (p[v], vertex(v, c))), RowSense::Eq, mean)?;
        }
        let obj = (0..nv).map(|v| {
            let load: f64 = (0..coords.len()).map(|c| vertex(v, c)).sum();
            let f = (k.overtime_rate * (load - k.length)).max(-k.idle_rate * (load - k.length));
            (p[v], -f)
        });
        m.set_objective(obj, 0.0)?;
        let out = solve_lp(&m);
        if out.status != LpStatus::Optimal {
            return Err(CoreError::Config(format!("moment LP for block {b} ended with {:?}", out.status)));
        }
        total += -out.objective;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Scenario;
    use crate::instances::single_block;

    fn one(d: f64, e: f64) -> ScenarioSet {
        ScenarioSet::new(vec![Scenario { d: vec![d], e: vec![e] }], "test")
    }

    fn sched() -> Schedule {
        Schedule::new(vec![Target::Block(0)])
    }

    #[test]
    fn inner_sup_worked_values() {
        let inst = single_block();
        let s = one(120.0, 60.0);
        assert!((inner_sup_bruteforce(&inst, &s, 0, 0, &sched(), 0.0).unwrap() - 7280.0).abs() < 1e-9);
        assert!((inner_sup_bruteforce(&inst, &s, 0, 0, &sched(), 20.0).unwrap() - 5200.0).abs() < 1e-9);
    }

    #[test]
    fn inner_sup_at_corner_sample_is_recourse() {
        let inst = single_block();
        let s = one(240.0, 240.0);
        let v = inner_sup_bruteforce(&inst, &s, 0, 0, &sched(), 26.0).unwrap();
        let r = recourse_cost(&inst, &sched(), &s.scenarios[0]).unwrap();
        assert!((v - r).abs() < 1e-9);
    }

    #[test]
    fn fixed_y_worked_value() {
        let inst = single_block();
        let v = wdro_fixed_y_value(&inst, &one(120.0, 60.0), 60.0, &sched()).unwrap();
        assert!((v.value - 6240.0).abs() < 1e-9, "{v:?}");
        assert!((v.rho - 52.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_radius_is_sample_average() {
        let inst = single_block();
        let s = one(120.0, 60.0);
        let v = wdro_fixed_y_value(&inst, &s, 0.0, &sched()).unwrap();
        assert!((v.value - 5200.0).abs() < 1e-9);
    }

    #[test]
    fn huge_radius_is_worst_corner() {
        let inst = single_block();
        let s = one(120.0, 60.0);
        let v = wdro_fixed_y_value(&inst, &s, 1e6, &sched()).unwrap();
        assert!((v.value - worst_case_recourse(&inst, &sched()).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn exhaustive_single_block() {
        let inst = single_block();
        let best = exhaustive_best_schedule(&inst, &one(120.0, 60.0), 0.0, false).unwrap();
        assert_eq!(best.schedule, sched());
        assert!((best.value - 5300.0).abs() < 1e-9);
    }

    #[test]
    fn saa_direct_example() {
        let inst = single_block();
        assert!((saa_objective_direct(&inst, &one(120.0, 60.0), &sched()).unwrap() - 5300.0).abs() < 1e-9);
        let at_cap = one(240.0, 240.0);
        assert!((saa_objective_direct(&inst, &at_cap, &sched()).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn enumeration_order_and_limit() {
        let inst = crate::instances::random_tiny_instance(3, 3, 2);
        let all = enumerate_schedules(&inst).unwrap();
        let expect: usize = (0..3).map(|i| inst.compatible_blocks(i).len() + 1).product();
        assert_eq!(all.len(), expect);
        assert_eq!(all.last().unwrap(), &Schedule::all_rejected(3));
        let mut big = crate::instances::minimal_instance(1, 10);
        big.surgeries = (0..6).map(|i| crate::domain::Surgery { id: i, ..big.surgeries[0].clone() }).collect();
        assert!(matches!(enumerate_schedules(&big), Err(CoreError::TooLarge(_))));
    }

    #[test]
    fn recourse_lp_matches_closed_form() {
        let inst = single_block();
        let s = one(120.0, 60.0);
        assert!((recourse_lp(&inst, &sched(), &s.scenarios[0]).unwrap() - 5200.0).abs() < 1e-9);
    }

    #[test]
    fn moment_value_with_point_supports() {
        let mut inst = single_block();
        inst.types[0].d_lo = 120.0;
        inst.types[0].d_hi = 120.0;
        inst.types[0].mean_duration = 120.0;
        inst.blocks[0].e_lo = 60.0;
        inst.blocks[0].e_hi = 60.0;
        let v = mdro_fixed_y_value(&inst, &sched()).unwrap();
        assert!((v - 5200.0).abs() < 1e-6);
    }
}
