//! Mixed-integer linear models, an exact reference solver, and a HiGHS
//! backend.
//!
//! Models are generic over [`Scalar`]; the concrete aliases below cover the
//! common cases.

pub mod backend;
pub mod bnb;
pub mod error;
pub mod lp_format;
pub mod model;
pub mod scalar;
pub mod simplex;
pub mod solution;

pub use backend::{backend_by_name, default_backend, solve, timed, Backend, ReferenceBackend, BACKEND_ENV};
#[cfg(feature = "highs")]
pub use backend::HighsBackend;
pub use bnb::{lp_relaxation_value, solve_reference_bnb, MAX_REFERENCE_BINARIES};
pub use error::{LpParseError, ModelError, SolveError};
pub use lp_format::{parse_lp, write_lp};
pub use model::{Constraint, MilpModel, Objective, RowSense, VarId, VarKind, Variable};
pub use scalar::{Rational, Scalar};
pub use simplex::{solve_lp, LpOutcome, LpStatus};
pub use solution::{verify, MilpSolution, SolveParams, SolveStatus, FEASIBILITY_TOL};

pub type Model = MilpModel<f64>;
pub type ExactModel = MilpModel<Rational>;
pub type Model32 = MilpModel<f32>;
pub type Solution = MilpSolution<f64>;
