//! Command-line driver: binds JSON configs and flags to the `fraglaw-core`
//! simulations and writes reproducible, manifest-stamped reports.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fraglaw_core::Error as CoreError;

mod commands;
pub mod config;
pub mod manifest;

pub use manifest::{OutputDir, RunManifest};

pub const THREADS_ENV: &str = "FRAGLAW_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(m) => CliError::Usage(m),
            CoreError::Numeric(m) => CliError::Numeric(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fraglaw",
    version,
    about = "Benford behaviour of stick-fragmentation processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a fragmentation model and write histogram, P_N and goodness-of-fit files.
    Simulate(Box<SimulateArgs>),
    /// Print the product-convergence error bound for N levels.
    Bound(BoundArgs),
    /// Run the per-level log-box construction whose leaves avoid Benford.
    Counterexample(CounterexampleArgs),
    /// Recompute statistics from a stored piece CSV.
    Analyze(AnalyzeArgs),
    /// Merge the histograms of several run directories.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Unrestricted,
    Restricted,
    Fixed,
    Discrete,
    Determinant,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Unrestricted => "unrestricted",
            ModelKind::Restricted => "restricted",
            ModelKind::Fixed => "fixed",
            ModelKind::Discrete => "discrete",
            ModelKind::Determinant => "determinant",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: ModelKind,
    /// JSON config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Depth of the tree, piece count of the chain, or N of the spectrum.
    #[arg(long)]
    pub levels: Option<u64>,
    /// Cut density: `uniform` or a JSON object such as `{"kind":"logbox","epsilon":0.1}`.
    #[arg(long)]
    pub density: Option<String>,
    /// Fixed cut proportion.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q_max: Option<u64>,
    /// Stopping sequence of the discrete model.
    #[arg(long)]
    pub stop: Option<String>,
    /// Starting length of the discrete model (`1000001`, `1e6`, `10^500`).
    #[arg(long = "L")]
    pub length: Option<String>,
    /// Matrix dimension.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub matrices: Option<u64>,
    /// Sample this many permutations per matrix instead of all of them.
    #[arg(long)]
    pub permutations: Option<u64>,
    /// Also write every terminal piece to pieces.csv.
    #[arg(long)]
    pub emit_pieces: bool,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// `uniform` or a JSON density object.
    #[arg(long, default_value = "uniform")]
    pub density: String,
    #[arg(long)]
    pub levels: u32,
    #[arg(long, default_value_t = 2.0)]
    pub s: f64,
    #[arg(long, default_value_t = fraglaw_core::mellin::DEFAULT_ELL_MAX)]
    pub ell_max: u32,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub levels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV with a `log10_length` column and an optional `weight` column.
    pub pieces: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories produced by `simulate`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
}

/// Parses the `FRAGLAW_THREADS` value.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Runs a parsed command on a dedicated pool of `threads` workers (rayon's
/// default when `None`). Returns the one-line summary.
pub fn run(cli: Cli, threads: Option<usize>) -> Result<String, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(CliError::internal)?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Bound(a) => commands::bound(&a),
        Command::Counterexample(a) => commands::counterexample(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Report(a) => commands::report(&a),
    })
}
