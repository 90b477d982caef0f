//! Command-line front end: argument parsing and the subcommands behind the
//! `catness` binary.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "catness", version, about = "Trajectory simulator for ancilla-measured spin ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble of measurement trajectories.
    Simulate(SimulateArgs),
    /// Distribution of the number of +1 outcomes.
    Pk(PkArgs),
    /// Predicted limit Sx eigenvalue for an outcome count.
    Predict(PredictArgs),
    /// Ideal-projection and closed-form reference curves.
    References(ReferencesArgs),
    /// Log-log fit of catness against N from CSV files.
    Fit(FitArgs),
    /// Compare the block engine with the dense 2^N reference.
    OracleCheck(OracleCheckArgs),
    /// Ramsey frequency uncertainty for a prepared state.
    Sensitivity(SensitivityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initial {
    Gibbs,
    AllUp,
}

/// Physical parameters shared by commands that prepare a state.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of spins.
    #[arg(long)]
    pub n: Option<usize>,
    /// Inverse temperature.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Probe field ω_P in the Gibbs state.
    #[arg(long)]
    pub h: Option<f64>,
    /// Coupling strength times interaction time.
    #[arg(long)]
    pub gt: Option<f64>,
    #[arg(long, value_enum)]
    pub initial: Option<Initial>,
    /// Key-value configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Measurement cycles per trajectory.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub runs: Option<u64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated measurement counts at which catness is recorded.
    #[arg(long)]
    pub checkpoints: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format of the ensemble table.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct PkArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub gt: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub k: u64,
    #[arg(long)]
    pub gt: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReferencesArgs {
    /// Comma-separated particle counts.
    #[arg(long, default_value = "3,5,7,15,31,63,127")]
    pub ns: String,
    /// Largest N for which the ideal-projection reference is computed.
    #[arg(long, default_value_t = 200)]
    pub ideal_limit: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV files with an `N` column.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Fit only this column; by default every value column is fitted.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct OracleCheckArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random outcome scripts to compare.
    #[arg(long, default_value_t = 50)]
    pub scripts: usize,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Project the initial state on `Sx = --sx`.
    Projection,
    /// Replay a recorded trajectory from an outcomes file.
    Trajectory,
}

#[derive(Debug, Clone, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "projection")]
    pub source: Source,
    /// Sx eigenvalue for `--source projection`.
    #[arg(long, allow_hyphen_values = true)]
    pub sx: Option<i64>,
    /// `outcomes.jsonl` written by `simulate`, for `--source trajectory`.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Use only the first STEP outcomes of the trajectory.
    #[arg(long)]
    pub step: Option<u64>,
    /// Interrogation time per Ramsey cycle.
    #[arg(long)]
    pub t_int: f64,
    /// Total measurement time.
    #[arg(long)]
    pub total_time: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Exit status for usage and domain errors.
pub const USAGE_EXIT: u8 = 2;

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Pk(a) => commands::pk(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::References(a) => commands::references(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::OracleCheck(a) => commands::oracle_check(&a),
        Command::Sensitivity(a) => commands::sensitivity(&a),
    }
}

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use catness_core::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::Domain(_) | Error::DegenerateProbability(_) => USAGE_EXIT,
                _ => 1,
            };
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return USAGE_EXIT;
        }
    }
    1
}
