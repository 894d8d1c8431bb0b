//! `p2ad`: generate synthetic flow data, train, evaluate and benchmark
//! shift-only anomaly detectors.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 data or
//! contract error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "p2ad", version, about = "Multiplication-free CNN anomaly detection on optical-flow magnitudes")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice of the run; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic flow-magnitude dataset.
    GenData(GenDataArgs),
    /// Train a model on a dataset's training split.
    Train(TrainArgs),
    /// Threshold × noise sweep over a dataset's test split.
    Eval(EvalArgs),
    /// Count operations and skipped accumulates, and time inference.
    Bench(BenchArgs),
    /// Dense optical flow between two frames, or the magnitude of a .flo file.
    Flow(FlowArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of normal frames.
    #[arg(long)]
    normal: Option<usize>,
    /// Number of anomalous frames.
    #[arg(long)]
    anomalous: Option<usize>,
    /// Fraction of each class assigned to training.
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for the model and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Unconstrained Q16 weights instead of powers of two.
    #[arg(long)]
    regular: bool,
    /// Maximum number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// SGD step size.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Stop once the epoch-mean loss falls below this.
    #[arg(long)]
    loss_stop: Option<f64>,
    /// Per-layer calibration quantiles, comma separated.
    #[arg(long, value_delimiter = ',')]
    theta_quantile: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model files; each may be power-of-two or regular.
    #[arg(long, required = true, num_args = 1..)]
    model: Vec<PathBuf>,
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for the report and ROC points.
    #[arg(long)]
    out: PathBuf,
    /// Threshold rows, comma separated: `none` or `mode:theta1:theta2`.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<String>>,
    /// Noise blob counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    noise: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    /// `none` or `mode:theta1:theta2`; defaults to the model's own thresholds.
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long, value_enum, default_value_t = commands::SplitChoice::All)]
    split: commands::SplitChoice,
    /// Also write the summary and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// First frame (.pgm or .pfm).
    #[arg(long, requires = "b", conflicts_with = "flo")]
    a: Option<PathBuf>,
    /// Second frame (.pgm or .pfm).
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// Existing flow field; skips estimation.
    #[arg(long, required_unless_present = "a")]
    flo: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write the estimated field as .flo.
    #[arg(long)]
    write_flo: bool,
    /// Polynomial expansion window, odd.
    #[arg(long)]
    window: Option<usize>,
    /// Displacement refinement iterations.
    #[arg(long)]
    iterations: Option<usize>,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl From<p2ad::Error> for Failure {
    fn from(e: p2ad::Error) -> Self {
        Failure::Data(e.into())
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Tag configuration problems as usage errors.
pub trait UsageContext<T> {
    fn usage(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

/// Tag everything else as data errors.
pub trait DataContext<T> {
    fn data(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> DataContext<T> for Result<T, E> {
    fn data(self) -> CliResult<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("P2AD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(anyhow::anyhow!("P2AD_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().data()
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let mut config = config::RunConfig::load(cli.config.as_deref()).usage()?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::GenData(args) => commands::gen_data(config, args),
        Command::Train(args) => commands::train(config, args),
        Command::Eval(args) => commands::eval(config, args),
        Command::Bench(args) => commands::bench(config, args),
        Command::Flow(args) => commands::flow(config, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Usage(e) | Failure::Data(e)) = &failure;
            eprintln!("error: {e:#}");
            ExitCode::from(failure.code())
        }
    }
}
