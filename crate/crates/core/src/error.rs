use std::path::Path;

use surgdro_milp::{ModelError, SolveError};

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("unknown surgery type `{0}`")]
    UnknownType(String),
    #[error("surgery {surgery} is not compatible with block {block}")]
    Incompatible { surgery: usize, block: usize },
    #[error("infeasible schedule: {0}")]
    Infeasible(String),
    #[error("negative load {0}")]
    NegativeLoad(f64),
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("value outside support: {0}")]
    OutOfSupport(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}, line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver finished with status {0:?}")]
    NotSolved(surgdro_milp::SolveStatus),
    #[error("variable `{name}` = {value} is not integral")]
    Fractional { name: String, value: f64 },
    #[error("instance too large for exhaustive enumeration: {0} assignments")]
    TooLarge(u128),
}

impl CoreError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CoreError::Io { path: path.display().to_string(), msg: e.to_string() }
    }
}
