//! Command-line front end: catalog generation, training, evaluation, the
//! exhaustive-search validation protocol and single-transfer queries.

pub mod commands;
pub mod config;
pub mod plot;

use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{run, Verdict};
pub use config::{CatalogSource, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config files or inputs. Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while running a valid configuration. Exit code 3.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "adr-planner",
    version,
    about = "Risk-aware active debris removal mission planner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic debris cloud as CSV.
    Generate(GenerateArgs),
    /// Train one DQN agent per seed; writes metrics, checkpoints and curves.
    Train(TrainArgs),
    /// Play greedy episodes with a trained checkpoint.
    Eval(EvalArgs),
    /// Certify a trained agent against the exhaustive-search optimum.
    Validate(ValidateArgs),
    /// Price one transfer between two circular orbits.
    Transfer(TransferArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON run config whose generator ranges are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub a_min_km: Option<f64>,
    #[arg(long)]
    pub a_max_km: Option<f64>,
    #[arg(long)]
    pub i_mean_deg: Option<f64>,
    #[arg(long)]
    pub i_sigma_deg: Option<f64>,
}

/// Flags shared by every command that builds a mission.
#[derive(Debug, Args, Default, Clone)]
pub struct RunArgs {
    /// JSON document mirroring the run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["catalog_tle", "generate_n"])]
    pub catalog_csv: Option<PathBuf>,
    #[arg(long, conflicts_with = "generate_n")]
    pub catalog_tle: Option<PathBuf>,
    /// Generate a synthetic catalog of this size.
    #[arg(long)]
    pub generate_n: Option<usize>,
    #[arg(long)]
    pub generate_seed: Option<u64>,
    /// Keep only the first N catalog entries.
    #[arg(long)]
    pub n_debris: Option<usize>,
    /// km/s
    #[arg(long)]
    pub dv_max: Option<f64>,
    /// s
    #[arg(long)]
    pub dt_max: Option<f64>,
    #[arg(long)]
    pub r_prio: Option<u8>,
    #[arg(long)]
    pub risk_threshold: Option<f64>,
    #[arg(long, action = ArgAction::Set)]
    pub risk_visible: Option<bool>,
    /// Start on this parking orbit, `a_km,i_deg,omega_deg,nu_deg`.
    #[arg(long)]
    pub parking_orbit: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub buffer_capacity: Option<usize>,
    #[arg(long)]
    pub target_sync_period: Option<u64>,
    #[arg(long)]
    pub learning_starts: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Exclude removed debris from the greedy choice.
    #[arg(long)]
    pub masked: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Sequence length searched by the oracle.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Multiplier applied to the optimal ΔV to form the budget.
    #[arg(long, default_value_t = 1.0)]
    pub dv_scale: f64,
    #[arg(long)]
    pub masked: bool,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Departure orbit `a_km,i_deg,omega_deg,nu_deg`.
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    /// Arrival orbit `a_km,i_deg,omega_deg,nu_deg`.
    #[arg(long, allow_hyphen_values = true)]
    pub to: String,
}
