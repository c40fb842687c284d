//! `surgdro`: generate instances, solve the scheduling models, simulate
//! schedules and run the replication experiments.

mod commands;
mod options;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use options::Options;

#[derive(Parser, Debug)]
#[command(name = "surgdro", version, about = "Distributionally robust elective surgery planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write an instance, its scenarios and (for paper-style instances) the
    /// duration records.
    Gen,
    /// Build and solve one model.
    Solve,
    /// Evaluate a schedule on fresh scenarios.
    Simulate,
    /// Wasserstein radius sweep.
    Sweep,
    /// Run one of the named experiments.
    Experiment {
        #[arg(value_enum)]
        name: Experiment,
    },
    /// Check the model builders against the brute-force oracles.
    Verify,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    RadiusSweep,
    PerfectInfo,
    MisspecifiedLogn,
    PolicyCompare,
    BlockAllocation,
    Timing,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(surgdro::CoreError),
    /// Verification ran but some check failed.
    Checks(usize),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Checks(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl From<surgdro::CoreError> for CliError {
    fn from(e: surgdro::CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<surgdro::milp::SolveError> for CliError {
    fn from(e: surgdro::milp::SolveError) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Core(surgdro::CoreError::io(path, e))
    }
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), CliError> {
        let mut opts = Options::resolve(cli.opts)?;
        let threads = *opts.threads.get_or_insert(0);
        if threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        match cli.command {
            Command::Gen => commands::gen(&mut opts),
            Command::Solve => commands::solve(&mut opts),
            Command::Simulate => commands::simulate(&mut opts),
            Command::Sweep => commands::experiment(&mut opts, Experiment::RadiusSweep, "sweep"),
            Command::Experiment { name } => {
                let label = name.to_possible_value().expect("no skipped variants").get_name().to_string();
                commands::experiment(&mut opts, name, &format!("experiment {label}"))
            }
            Command::Verify => commands::verify(&mut opts),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Checks(n)) => {
            eprintln!("verify: {n} check(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
