//! Oracle suite: compares model builders and solver output against the
//! brute-force references in [`crate::oracle`].

use serde::{Deserialize, Serialize};
use surgdro_milp::{Backend, SolveParams};

use crate::domain::{Instance, Schedule, Target};
use crate::error::CoreError;
use crate::ingest::ScenarioSet;
use crate::models::{build_wdro, extract_schedule, solve_model, CutRow, ModelSpec, WdroConfig};
use crate::oracle::{enumerate_schedules, exhaustive_best_schedule, inner_sup_bruteforce, rho_cap, wdro_fixed_y_value};
use crate::recourse::first_stage_cost;

pub const CUT_TOL: f64 = 1e-9;
pub const OBJ_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    CutExactness,
    FixedYDual,
    Exhaustive,
    EpsilonZero,
}

impl Check {
    pub const ALL: [Check; 4] = [Check::CutExactness, Check::FixedYDual, Check::Exhaustive, Check::EpsilonZero];
}

impl std::str::FromStr for Check {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s {
            "cut-exactness" => Ok(Check::CutExactness),
            "fixed-y-dual" => Ok(Check::FixedYDual),
            "exhaustive" => Ok(Check::Exhaustive),
            "epsilon-zero" => Ok(Check::EpsilonZero),
            other => Err(CoreError::Config(format!("unknown check `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub cases: usize,
    /// First mismatch, when any.
    pub detail: Option<String>,
}

fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Schedules the fixed-`y` checks run on: every schedule when there are few,
/// otherwise all-reject plus the first-compatible-block assignment.
fn probe_schedules(inst: &Instance) -> Vec<Schedule> {
    match enumerate_schedules(inst) {
        Ok(all) if all.len() <= 64 => all,
        _ => {
            let first = (0..inst.num_surgeries())
                .map(|i| inst.compatible_blocks(i).first().map_or(Target::Reject, |&b| Target::Block(b)))
                .collect();
            vec![Schedule::all_rejected(inst.num_surgeries()), Schedule::new(first)]
        }
    }
}

/// Max over the rows produced by `rows(n, b)` against the brute-force inner
/// supremum, for probe schedules and a grid of dual values. Reports the
/// first `(n, b)` that disagrees.
pub fn check_cut_rows(
    inst: &Instance,
    scen: &ScenarioSet,
    rows: &dyn Fn(usize, usize) -> Result<Vec<CutRow<f64>>, CoreError>,
) -> Result<CheckOutcome, CoreError> {
    let cap = rho_cap(inst);
    let grid: Vec<f64> = (0..=20).map(|k| cap * k as f64 / 20.0).collect();
    let mut cases = 0;
    for n in 0..scen.len() {
        for b in 0..inst.num_blocks() {
            let cut = rows(n, b)?;
            for y in probe_schedules(inst) {
                for &rho in &grid {
                    let best = cut.iter().map(|r| r.evaluate(&y, b, &rho)).fold(f64::NEG_INFINITY, f64::max);
                    let brute = inner_sup_bruteforce(inst, scen, n, b, &y, rho)?;
                    cases += 1;
                    if (best - brute).abs() > CUT_TOL * (1.0 + brute.abs()) {
                        return Ok(CheckOutcome {
                            check: Check::CutExactness,
                            passed: false,
                            cases,
                            detail: Some(format!(
                                "cut rows for (n={n}, b={b}) give {best} at rho={rho}, brute force {brute}"
                            )),
                        });
                    }
                }
            }
        }
    }
    Ok(CheckOutcome { check: Check::CutExactness, passed: true, cases, detail: None })
}

/// The Wasserstein model with `y` fixed through its bounds, against the
/// one-dimensional dual oracle.
pub fn check_fixed_y_dual(
    inst: &Instance,
    scen: &ScenarioSet,
    epsilon: f64,
    backend: &dyn Backend,
    params: &SolveParams,
) -> Result<CheckOutcome, CoreError> {
    let model = build_wdro::<f64>(inst, scen, &WdroConfig::new(epsilon))?;
    let mut cases = 0;
    for y in probe_schedules(inst) {
        let mut fixed = model.clone();
        for (i, t) in y.assignment.iter().enumerate() {
            for b in inst.compatible_blocks(i) {
                let v = fixed.var(&crate::models::y_name(i, b)).expect("built above");
                let on = if *t == Target::Block(b) { 1.0 } else { 0.0 };
                fixed = fixed.with_bounds(v, Some(on), Some(on));
            }
            let r = fixed.var(&crate::models::reject_name(i)).expect("built above");
            let on = if *t == Target::Reject { 1.0 } else { 0.0 };
            fixed = fixed.with_bounds(r, Some(on), Some(on));
        }
        let sol = backend.solve(&fixed, params)?;
        let want = first_stage_cost(inst, &y)? + wdro_fixed_y_value(inst, scen, epsilon, &y)?.value;
        cases += 1;
        if !within(sol.objective, want, OBJ_TOL) {
            return Ok(CheckOutcome {
                check: Check::FixedYDual,
                passed: false,
                cases,
                detail: Some(format!("schedule {:?}: model {} oracle {want}", y.assignment, sol.objective)),
            });
        }
    }
    Ok(CheckOutcome { check: Check::FixedYDual, passed: true, cases, detail: None })
}

/// Solver optimum against enumeration of every schedule.
pub fn check_exhaustive(
    inst: &Instance,
    scen: &ScenarioSet,
    epsilon: f64,
    backend: &dyn Backend,
    params: &SolveParams,
) -> Result<CheckOutcome, CoreError> {
    let solved = solve_model(inst, &ModelSpec::Wdro(scen, WdroConfig::new(epsilon)), backend, params)?;
    let best = exhaustive_best_schedule(inst, scen, epsilon, false)?;
    let passed = within(solved.objective, best.value, OBJ_TOL);
    Ok(CheckOutcome {
        check: Check::Exhaustive,
        passed,
        cases: 1,
        detail: (!passed).then(|| format!("model {} enumeration {}", solved.objective, best.value)),
    })
}

/// Zero radius against the scenario-average model.
pub fn check_epsilon_zero(
    inst: &Instance,
    scen: &ScenarioSet,
    backend: &dyn Backend,
    params: &SolveParams,
) -> Result<CheckOutcome, CoreError> {
    let w = solve_model(inst, &ModelSpec::Wdro(scen, WdroConfig::new(0.0)), backend, params)?;
    let s = solve_model(inst, &ModelSpec::Saa(scen), backend, params)?;
    let passed = within(w.objective, s.objective, OBJ_TOL);
    Ok(CheckOutcome {
        check: Check::EpsilonZero,
        passed,
        cases: 1,
        detail: (!passed).then(|| format!("wdro(0) {} saa {}", w.objective, s.objective)),
    })
}

/// Runs the selected checks in a fixed order.
pub fn run_checks(
    inst: &Instance,
    scen: &ScenarioSet,
    epsilon: f64,
    checks: &[Check],
    backend: &dyn Backend,
    params: &SolveParams,
) -> Result<Vec<CheckOutcome>, CoreError> {
    let mut out = Vec::new();
    for c in Check::ALL {
        if !checks.contains(&c) {
            continue;
        }
        out.push(match c {
            Check::CutExactness => check_cut_rows(inst, scen, &|n, b| crate::models::eta_cut_rows(inst, scen, n, b))?,
            Check::FixedYDual => check_fixed_y_dual(inst, scen, epsilon, backend, params)?,
            Check::Exhaustive => check_exhaustive(inst, scen, epsilon, backend, params)?,
            Check::EpsilonZero => check_epsilon_zero(inst, scen, backend, params)?,
        });
    }
    Ok(out)
}

/// Decodes and re-checks a solution of a model built here; convenience for
/// callers that solve models themselves.
pub fn decode(
    inst: &Instance,
    model: &surgdro_milp::Model,
    sol: &surgdro_milp::Solution,
) -> Result<Schedule, CoreError> {
    extract_schedule(inst, model, sol)
}
