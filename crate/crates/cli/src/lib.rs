//! `chanpred` command-line pipeline.
//!
//! Every command is a pure function of its config, flags and seeds: re-runs
//! write byte-identical series, dataset, weight and CSV files. Each command
//! also writes `<output>.manifest.json` with the effective configuration and
//! SHA-256 hashes of its inputs and outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "chanpred", version, about = "Channel simulation and multi-step sub-band prediction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "CHANPRED_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// JSON configuration file layered over the profile defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in defaults: `full` or `desk`.
    #[arg(long, global = true, default_value = "full")]
    pub profile: String,
    /// Override one configuration key, e.g. `--set scenario.snr_db=20`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one channel run and store its CFR series.
    Simulate(SimulateArgs),
    /// Tensorize runs into a train/test dataset.
    BuildDataset(BuildDatasetArgs),
    /// Train a predictor or classifier on a dataset.
    Train(TrainArgs),
    /// Per-step MSE, ROC curves or a fresh-channel check.
    Evaluate(EvaluateArgs),
    /// Normalised auto- or cross-covariance of band power.
    Covariance(CovarianceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Snapshots to simulate [default: what one dataset run needs].
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: series_seed<SEED>.cfrd]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Series files, one per simulation run.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub t_len: Option<usize>,
    #[arg(long)]
    pub span_d: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Deep-fade threshold as a quantile of training magnitudes.
    #[arg(long, conflicts_with = "threshold_abs")]
    pub threshold_quantile: Option<f64>,
    /// Deep-fade threshold in scaled magnitude units.
    #[arg(long)]
    pub threshold_abs: Option<f64>,
    #[arg(long, default_value = "dataset.cfrd")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Predictor,
    Classifier,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "predictor")]
    pub head: HeadArg,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Seeds both weight initialisation and batch shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_shuffle: bool,
    /// Weight file [default: <head>.cnnw].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch loss CSV [default: <head>_log.csv].
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Mse,
    Roc,
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Partition {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Dataset the network was trained on; fresh mode reuses its scale.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    #[arg(long, value_enum, default_value = "test")]
    pub partition: Partition,
    /// ROC bin [default: band centre].
    #[arg(long, conflicts_with = "pool")]
    pub bin: Option<usize>,
    /// Pool every bin into each ROC curve.
    #[arg(long)]
    pub pool: bool,
    /// Fresh-channel seed [default: eval.fresh_seed].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fresh-channel examples [default: eval.fresh_examples].
    #[arg(long)]
    pub examples: Option<usize>,
    /// [default: <mode>.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CovarianceArgs {
    pub run_a: PathBuf,
    /// Second run; gives the cross-covariance.
    pub run_b: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub max_lag: usize,
    /// Use one bin's magnitude instead of band power.
    #[arg(long)]
    pub bin: Option<usize>,
    #[arg(long, default_value = "covariance.csv")]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

impl From<HeadArg> for chanpred::models::Head {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Predictor => chanpred::models::Head::Predictor,
            HeadArg::Classifier => chanpred::models::Head::Classifier,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::usage(msg)
}
