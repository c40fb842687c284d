//! Run settings shared by every command. Each field can come from a flag or
//! the `--config` JSON file; flags win. Commands fill in the defaults they
//! use, so the struct ends up holding the effective configuration.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use surgdro::evaluate::Policy;
use surgdro::ingest::{DurationSampler, EmergencySampler};
use surgdro::instances::CostStructure;
use surgdro::models::ModelKind;
use surgdro::verify::Check;

use crate::CliError;

/// Parses a flag value with the same spelling serde uses for the type.
fn serde_value<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn check_value(s: &str) -> Result<Check, String> {
    s.parse().map_err(|e: surgdro::CoreError| e.to_string())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// JSON or TOML file with any of these settings; flags override it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Written into `resolved-config.json`; ignored when read back.
    #[arg(skip)]
    #[serde(skip_serializing)]
    pub command: Option<String>,

    /// Instance JSON file.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<PathBuf>,
    /// Scenario CSV file (`scenario_index,kind,entity_index,value_min`).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<PathBuf>,
    /// Schedule JSON file, for `simulate`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    /// Historical duration records (`specialty,duration_min`) for empirical
    /// resampling. Defaults to the bundled synthetic records.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub durations: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// saa, wdro, mdro or wdsba.
    #[arg(long, global = true, value_parser = serde_value::<ModelKind>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    /// Models of a replication study, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_parser = serde_value::<ModelKind>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<ModelKind>>,
    /// Wasserstein radius, or a comma-separated list for studies.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    /// Upper bound on the Wasserstein dual variable.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_upper: Option<f64>,
    /// In-sample size, or a comma-separated list for studies.
    #[arg(long = "N", global = true, value_delimiter = ',')]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    /// Out-of-sample size.
    #[arg(long = "Nprime", global = true)]
    #[serde(rename = "Nprime", skip_serializing_if = "Option::is_none")]
    pub n_prime: Option<usize>,
    /// Replications per study cell.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Master seed; every sample in a run is derived from it.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Surgery count of generated instances, or a list for `timing`.
    #[arg(long = "I", global = true, value_delimiter = ',')]
    #[serde(rename = "I", skip_serializing_if = "Option::is_none")]
    pub surgeries: Option<Vec<usize>>,
    /// Cost structure, or a list for policy and timing experiments.
    #[arg(long, global = true, value_delimiter = ',', value_parser = serde_value::<CostStructure>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<CostStructure>>,
    /// Shrink the weekly block schedule to the surgery count.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled_blocks: Option<bool>,
    /// Schedule cost as a multiple of overtime rate times mean duration.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patient_cost_factor: Option<f64>,
    /// Ratio of postponement cost to schedule cost.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patient_cost_kappa: Option<f64>,
    /// flexible or dedicated.
    #[arg(long, global = true, value_parser = serde_value::<Policy>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    /// ORs kept for emergencies under the dedicated policy.
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reserved_rooms: Option<Vec<String>>,
    /// Emergency-rate multiplier, or a list for policy experiments.
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emergency_rate_mult: Option<Vec<f64>>,

    /// Duration sampler for in-sample scenarios.
    #[arg(long, global = true, value_parser = serde_value::<DurationSampler>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<DurationSampler>,
    /// Duration sampler for out-of-sample scenarios.
    #[arg(long, global = true, value_parser = serde_value::<DurationSampler>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_sampler: Option<DurationSampler>,
    /// Emergency-capacity sampler.
    #[arg(long, global = true, value_parser = serde_value::<EmergencySampler>)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emergency_sampler: Option<EmergencySampler>,

    /// Seconds per solve.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    /// Relative optimality gap.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Worker threads for studies; 0 lets the pool decide.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    /// `gen`: paper-style instance with the full weekly block schedule.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paper_default: Option<bool>,
    /// `gen`: number of surgery types of a minimal custom instance.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub types: Option<usize>,
    /// `gen` and `block-allocation`: number of blocks.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    /// `solve`: also write the model in LP format.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_lp: Option<bool>,
    /// `verify`: run only these checks (cut-exactness, fixed-y-dual,
    /// exhaustive, epsilon-zero).
    #[arg(long, global = true, value_delimiter = ',', value_parser = check_value)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<Vec<Check>>,
}

impl Options {
    /// Flags layered over the config file (JSON, or TOML by extension), if
    /// one was given.
    pub fn resolve(flags: Options) -> Result<Options, CliError> {
        let Some(path) = flags.config.clone() else {
            return Ok(flags);
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: {e}", path.display()));
        let mut base: serde_json::Value = if path.extension().is_some_and(|x| x == "toml") {
            toml::from_str(&text).map_err(|e| bad(&e))?
        } else {
            serde_json::from_str(&text).map_err(|e| bad(&e))?
        };
        let over = serde_json::to_value(&flags).expect("options serialize");
        match (&mut base, over) {
            (serde_json::Value::Object(b), serde_json::Value::Object(o)) => b.extend(o),
            _ => return Err(CliError::Usage(format!("{}: expected a table of options", path.display()))),
        }
        let mut merged: Options = serde_json::from_value(base).map_err(|e| bad(&e))?;
        merged.config = Some(path);
        Ok(merged)
    }

    pub fn out_dir(&mut self, default: &str) -> PathBuf {
        self.out.get_or_insert_with(|| PathBuf::from(default)).clone()
    }

    pub fn seed(&mut self) -> u64 {
        *self.seed.get_or_insert(1)
    }

    pub fn epsilons(&mut self, default: &[f64]) -> Vec<f64> {
        self.epsilon.get_or_insert_with(|| default.to_vec()).clone()
    }

    pub fn epsilon(&mut self, default: f64) -> Result<f64, CliError> {
        single("epsilon", self.epsilons(&[default]))
    }

    pub fn n_list(&mut self, default: &[usize]) -> Vec<usize> {
        self.n.get_or_insert_with(|| default.to_vec()).clone()
    }

    pub fn n_single(&mut self, default: usize) -> Result<usize, CliError> {
        single("N", self.n_list(&[default]))
    }

    pub fn n_prime(&mut self, default: usize) -> usize {
        *self.n_prime.get_or_insert(default)
    }

    pub fn reps(&mut self, default: usize) -> usize {
        *self.reps.get_or_insert(default)
    }

    pub fn surgeries_list(&mut self, default: &[usize]) -> Vec<usize> {
        self.surgeries.get_or_insert_with(|| default.to_vec()).clone()
    }

    pub fn surgeries(&mut self, default: usize) -> Result<usize, CliError> {
        single("I", self.surgeries_list(&[default]))
    }

    pub fn costs(&mut self, default: &[CostStructure]) -> Vec<CostStructure> {
        self.cost.get_or_insert_with(|| default.to_vec()).clone()
    }

    pub fn cost(&mut self) -> Result<CostStructure, CliError> {
        single("cost", self.costs(&[CostStructure::Cost1]))
    }

    pub fn mults(&mut self, default: &[f64]) -> Vec<f64> {
        self.emergency_rate_mult.get_or_insert_with(|| default.to_vec()).clone()
    }

    pub fn mult(&mut self) -> Result<f64, CliError> {
        single("emergency-rate-mult", self.mults(&[1.0]))
    }

    pub fn reserved_rooms(&mut self) -> Vec<String> {
        self.reserved_rooms.get_or_insert_with(|| vec!["9".into(), "10".into()]).clone()
    }

    pub fn sampler(&mut self, default: DurationSampler) -> DurationSampler {
        *self.sampler.get_or_insert(default)
    }

    pub fn eval_sampler(&mut self, default: DurationSampler) -> DurationSampler {
        *self.eval_sampler.get_or_insert(default)
    }

    pub fn emergency_sampler(&mut self) -> EmergencySampler {
        *self.emergency_sampler.get_or_insert(EmergencySampler::TruncatedExponential)
    }

    pub fn flag(field: &mut Option<bool>) -> bool {
        *field.get_or_insert(false)
    }
}

fn single<T: Copy>(name: &str, v: Vec<T>) -> Result<T, CliError> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(CliError::Usage(format!("--{name} takes a single value for this command"))),
    }
}

/// Writes `resolved-config.json` next to the outputs.
pub fn write_resolved(dir: &Path, command: &str, opts: &Options) -> Result<(), CliError> {
    let mut v = serde_json::to_value(opts).expect("options serialize");
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("command".into(), serde_json::Value::String(command.into()));
    }
    crate::write(dir, "resolved-config.json", &(serde_json::to_string_pretty(&v).expect("json") + "\n"))
}
