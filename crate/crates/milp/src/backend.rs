//! Solver backends behind one interface.
//!
//! Every backend returns a [`MilpSolution`] that has already been re-checked
//! against the model at [`crate::FEASIBILITY_TOL`].

use std::time::Instant;

use crate::bnb::solve_reference_bnb;
use crate::error::SolveError;
use crate::model::MilpModel;
use crate::solution::{verify, MilpSolution, SolveParams, SolveStatus};

/// Environment variable naming the backend used by [`default_backend`].
pub const BACKEND_ENV: &str = "SURGDRO_SOLVER";

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Raw solve without the post-check; use [`Backend::solve`].
    fn solve_unchecked(
        &self,
        model: &MilpModel<f64>,
        params: &SolveParams,
    ) -> Result<MilpSolution, SolveError>;

    fn solve(&self, model: &MilpModel<f64>, params: &SolveParams) -> Result<MilpSolution, SolveError> {
        params.validate()?;
        model.validate()?;
        let sol = self.solve_unchecked(model, params)?;
        verify(model, &sol)?;
        Ok(sol)
    }
}

/// The bundled exact branch-and-bound, over `f64`.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReferenceBackend;

impl Backend for ReferenceBackend {
    fn name(&self) -> &'static str {
        "reference"
    }

    fn solve_unchecked(
        &self,
        model: &MilpModel<f64>,
        _params: &SolveParams,
    ) -> Result<MilpSolution, SolveError> {
        solve_reference_bnb(model)
    }
}

#[cfg(feature = "highs")]
#[derive(Debug, Default, Clone, Copy)]
pub struct HighsBackend;

#[cfg(feature = "highs")]
impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve_unchecked(
        &self,
        model: &MilpModel<f64>,
        params: &SolveParams,
    ) -> Result<MilpSolution, SolveError> {
        use highs::{HighsModelStatus, RowProblem, Sense};

        let start = Instant::now();
        let mut pb = RowProblem::default();
        let mut obj = vec![0.0; model.num_vars()];
        for (v, c) in &model.objective.terms {
            obj[v.0] += c;
        }
        let cols: Vec<_> = model
            .variables
            .iter()
            .zip(&obj)
            .map(|(v, &c)| {
                let lo = v.lower.unwrap_or(f64::NEG_INFINITY);
                let hi = v.upper.unwrap_or(f64::INFINITY);
                match v.kind {
                    crate::VarKind::Binary => pb.add_integer_column(c, lo..=hi),
                    crate::VarKind::Continuous => pb.add_column(c, lo..=hi),
                }
            })
            .collect();
        for row in &model.constraints {
            let terms: Vec<_> = row.terms.iter().map(|(v, c)| (cols[v.0], *c)).collect();
            match row.sense {
                crate::RowSense::Le => pb.add_row(..=row.rhs, terms),
                crate::RowSense::Ge => pb.add_row(row.rhs.., terms),
                crate::RowSense::Eq => pb.add_row(row.rhs..=row.rhs, terms),
            }
        }
        let mut hm = pb.optimise(Sense::Minimise);
        hm.make_quiet();
        hm.set_option("time_limit", params.time_limit);
        hm.set_option("mip_rel_gap", params.rel_gap);
        hm.set_option("random_seed", 0);
        // HiGHS checks feasibility on the scaled model; rows with large
        // coefficients can then miss the absolute tolerance after unscaling.
        hm.set_option("primal_feasibility_tolerance", 1e-9);
        hm.set_option("mip_feasibility_tolerance", 1e-9);
        // Thread options are process-global in HiGHS; a refusal is harmless.
        let _ = hm.try_set_option("threads", params.threads as i32);
        if params.threads == 1 {
            let _ = hm.try_set_option("parallel", "off");
        }
        let solved = hm
            .try_solve()
            .map_err(|e| SolveError::Backend(format!("HiGHS returned {e:?}")))?;
        let runtime = start.elapsed().as_secs_f64();
        let n = model.num_vars();
        let mut status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                SolveStatus::Unbounded
            }
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => SolveStatus::Limit,
            HighsModelStatus::ObjectiveBound | HighsModelStatus::ObjectiveTarget => SolveStatus::Limit,
            other => return Err(SolveError::Backend(format!("HiGHS model status {other:?}"))),
        };
        let gap = if model.num_binaries() == 0 { 0.0 } else { solved.mip_gap() };
        if status == SolveStatus::Optimal && gap.is_finite() && gap > params.rel_gap.max(1e-9) {
            status = SolveStatus::Limit;
        }
        let have_values = matches!(status, SolveStatus::Optimal)
            || (status == SolveStatus::Limit && solved.objective_value().is_finite() && gap.is_finite());
        if !have_values {
            return Ok(MilpSolution::without_values(status, n, runtime));
        }
        let mut values = solved.get_solution().columns().to_vec();
        for (x, v) in values.iter_mut().zip(&model.variables) {
            if v.kind == crate::VarKind::Binary {
                *x = x.round();
            }
        }
        let objective = model.objective_value(&values);
        Ok(MilpSolution { status, objective, values, gap: gap.max(0.0), runtime, nodes: 0 })
    }
}

/// Backend by name: `highs` (when compiled in) or `reference`.
pub fn backend_by_name(name: &str) -> Result<Box<dyn Backend>, SolveError> {
    match name {
        "reference" => Ok(Box::new(ReferenceBackend)),
        #[cfg(feature = "highs")]
        "highs" => Ok(Box::new(HighsBackend)),
        other => Err(SolveError::BackendUnavailable(other.to_string())),
    }
}

/// Backend named by `SURGDRO_SOLVER`, else HiGHS when compiled in, else the
/// reference solver.
pub fn default_backend() -> Result<Box<dyn Backend>, SolveError> {
    match std::env::var(BACKEND_ENV) {
        Ok(name) if !name.is_empty() => backend_by_name(&name),
        _ => {
            #[cfg(feature = "highs")]
            {
                Ok(Box::new(HighsBackend))
            }
            #[cfg(not(feature = "highs"))]
            {
                Ok(Box::new(ReferenceBackend))
            }
        }
    }
}

/// Solves with [`default_backend`].
pub fn solve(model: &MilpModel<f64>, params: &SolveParams) -> Result<MilpSolution, SolveError> {
    default_backend()?.solve(model, params)
}

/// Runs `f` and reports wall time in seconds alongside its result.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}
