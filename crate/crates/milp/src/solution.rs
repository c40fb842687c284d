use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::model::MilpModel;
use crate::scalar::Scalar;

/// Absolute feasibility tolerance applied to every surfaced solution.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Time or node limit reached; `values` hold the incumbent if one exists.
    Limit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveParams {
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    /// Relative optimality gap.
    pub rel_gap: f64,
    pub threads: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self { time_limit: 600.0, rel_gap: 1e-6, threads: 1 }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.time_limit > 0.0) {
            return Err(SolveError::Params("time_limit must be positive".into()));
        }
        if !(self.rel_gap >= 0.0) {
            return Err(SolveError::Params("rel_gap must be nonnegative".into()));
        }
        if self.threads == 0 {
            return Err(SolveError::Params("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MilpSolution<S = f64> {
    pub status: SolveStatus,
    pub objective: S,
    /// Indexed like `MilpModel::variables`.
    pub values: Vec<S>,
    pub gap: f64,
    /// Seconds.
    pub runtime: f64,
    pub nodes: u64,
}

impl<S: Scalar> MilpSolution<S> {
    pub fn without_values(status: SolveStatus, n: usize, runtime: f64) -> Self {
        Self { status, objective: S::zero(), values: vec![S::zero(); n], gap: f64::INFINITY, runtime, nodes: 0 }
    }

    pub fn value(&self, model: &MilpModel<S>, name: &str) -> Option<S> {
        model.var(name).map(|v| self.values[v.0].clone())
    }

    /// Name → value map, for reports.
    pub fn named_values(&self, model: &MilpModel<S>) -> BTreeMap<String, f64> {
        model
            .variables
            .iter()
            .zip(&self.values)
            .map(|(v, x)| (v.name.clone(), x.to_f64_lossy()))
            .collect()
    }

    pub fn has_values(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal)
            || (self.status == SolveStatus::Limit && self.gap.is_finite())
    }
}

/// Re-checks `sol` against every bound, row and integrality requirement of
/// `model` at [`FEASIBILITY_TOL`].
pub fn verify(model: &MilpModel<f64>, sol: &MilpSolution<f64>) -> Result<(), SolveError> {
    if !sol.has_values() {
        return Ok(());
    }
    let (amount, who) = model.max_violation(&sol.values);
    if amount > FEASIBILITY_TOL {
        return Err(SolveError::Verification { item: who.unwrap_or_default(), amount });
    }
    Ok(())
}
