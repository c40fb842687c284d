//! Elective surgery planning with flexible operating rooms under uncertain
//! durations and emergency demand.
//!
//! Instance data is `f64`. Model builders and the recourse evaluator are
//! generic over [`surgdro_milp::Scalar`], so the same model can be produced
//! in exact rational arithmetic and certified by the reference solver.

pub mod domain;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod instances;
pub mod models;
pub mod oracle;
pub mod recourse;
pub mod verify;

pub use domain::{
    check_scenario, forced_rejections, validate_instance, Block, BlockOutcome, Instance, Scenario, Schedule,
    Surgery, SurgeryType, Target, Violation,
};
pub use error::CoreError;
pub use ingest::{DurationDataset, DurationSampler, EmergencySampler, SamplerSpec, ScenarioSet};
pub use models::{
    build_mdro, build_saa, build_wdro, build_wdsba, eta_cut_rows, extract_schedule, solve_model, CutRow,
    ModelKind, ModelSpec, MomentInfo, Solved, WdroConfig,
};
pub use recourse::{first_stage_cost, recourse_cost};
pub use surgdro_milp as milp;

/// Models over the exact rational scalar.
pub type ExactModel = surgdro_milp::ExactModel;
/// Models over `f64`.
pub type Model = surgdro_milp::Model;
