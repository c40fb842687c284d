//! Exact reference branch-and-bound for small binary programs.
//!
//! Best-bound node selection, branching on the most fractional binary, and an
//! LP relaxation per node solved by [`crate::simplex`]. Generic over the
//! scalar so the same search can run in exact rational arithmetic.

use std::time::Instant;

use crate::error::SolveError;
use crate::model::{MilpModel, VarId};
use crate::scalar::{fractionality, Scalar};
use crate::simplex::{solve_lp_with_bounds, LpStatus};
use crate::solution::{MilpSolution, SolveStatus};

pub const MAX_REFERENCE_BINARIES: usize = 30;

struct Node<S> {
    bound: S,
    seq: u64,
    fixed: Vec<(VarId, bool)>,
}

/// Solves `model` to proven optimality. Fails on more than
/// [`MAX_REFERENCE_BINARIES`] binaries.
pub fn solve_reference_bnb<S: Scalar>(model: &MilpModel<S>) -> Result<MilpSolution<S>, SolveError> {
    model.validate()?;
    let found = model.num_binaries();
    if found > MAX_REFERENCE_BINARIES {
        return Err(SolveError::TooManyBinaries { found, limit: MAX_REFERENCE_BINARIES });
    }
    let start = Instant::now();
    let n = model.num_vars();
    let base: Vec<(Option<S>, Option<S>)> =
        model.variables.iter().map(|v| (v.lower.clone(), v.upper.clone())).collect();
    let binaries: Vec<VarId> = model.binaries().collect();

    let mut incumbent: Option<(S, Vec<S>)> = None;
    let mut open = vec![Node { bound: S::zero(), seq: 0, fixed: Vec::new() }];
    let mut root = true;
    let mut seq = 1u64;
    let mut nodes = 0u64;

    while !open.is_empty() {
        // Best bound first; ties by creation order for reproducibility.
        let pick = (0..open.len())
            .min_by(|&a, &b| {
                open[a]
                    .bound
                    .partial_cmp(&open[b].bound)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(open[a].seq.cmp(&open[b].seq))
            })
            .expect("nonempty");
        let node = open.swap_remove(pick);
        if !root && prunable(&node.bound, incumbent.as_ref().map(|(v, _)| v)) {
            continue;
        }
        nodes += 1;

        let mut bounds = base.clone();
        for (v, one) in &node.fixed {
            let val = if *one { S::one() } else { S::zero() };
            bounds[v.0] = (Some(val.clone()), Some(val));
        }
        let lp = solve_lp_with_bounds(model, &bounds);
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                root = false;
                continue;
            }
            LpStatus::Unbounded if root => {
                return Ok(MilpSolution::without_values(
                    SolveStatus::Unbounded,
                    n,
                    start.elapsed().as_secs_f64(),
                ));
            }
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                return Err(SolveError::Backend(format!(
                    "reference LP relaxation ended with {:?}",
                    lp.status
                )));
            }
        }
        root = false;
        if prunable(&lp.objective, incumbent.as_ref().map(|(v, _)| v)) {
            continue;
        }

        // Most fractional binary; ties to the lowest index.
        let mut branch: Option<(VarId, S)> = None;
        for &b in &binaries {
            let f = fractionality(&lp.values[b.0]);
            if f > S::int_tol() && branch.as_ref().is_none_or(|(_, bf)| f > *bf) {
                branch = Some((b, f));
            }
        }
        match branch {
            None => {
                let mut values = lp.values;
                for &b in &binaries {
                    values[b.0] = round01(&values[b.0]);
                }
                let obj = model.objective_value(&values);
                let better = incumbent.as_ref().is_none_or(|(v, _)| obj < *v);
                if better {
                    incumbent = Some((obj, values));
                }
            }
            Some((var, _)) => {
                for one in [false, true] {
                    let mut fixed = node.fixed.clone();
                    fixed.push((var, one));
                    open.push(Node { bound: lp.objective.clone(), seq, fixed });
                    seq += 1;
                }
            }
        }
    }

    let runtime = start.elapsed().as_secs_f64();
    Ok(match incumbent {
        Some((objective, values)) => MilpSolution {
            status: SolveStatus::Optimal,
            objective,
            values,
            gap: 0.0,
            runtime,
            nodes,
        },
        None => {
            let mut s = MilpSolution::without_values(SolveStatus::Infeasible, n, runtime);
            s.nodes = nodes;
            s
        }
    })
}

/// Optimal value of the continuous relaxation, if it has one.
pub fn lp_relaxation_value<S: Scalar>(model: &MilpModel<S>) -> Option<S> {
    let out = crate::simplex::solve_lp(model);
    (out.status == LpStatus::Optimal).then_some(out.objective)
}

fn prunable<S: Scalar>(bound: &S, incumbent: Option<&S>) -> bool {
    match incumbent {
        None => false,
        Some(inc) => {
            let slack = if S::is_exact() {
                S::zero()
            } else {
                S::zero_tol() * (S::one() + inc.abs())
            };
            *bound >= inc.clone() - slack
        }
    }
}

fn round01<S: Scalar>(v: &S) -> S {
    if *v >= S::from_f64_lossy(0.5) { S::one() } else { S::zero() }
}
