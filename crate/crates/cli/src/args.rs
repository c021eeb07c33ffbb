use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lfgp::datasets::Generator;
use lfgp::{ClusterMode, EmbeddingMethod, StatisticKind};

/// Comma-separated values given as one flag, so a later occurrence replaces
/// an earlier one instead of appending to it.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|v| if v.is_empty() { Err("empty list".to_string()) } else { Ok(List(v)) })
    }
}

#[derive(Debug, Parser)]
#[command(name = "lfgp", version, about = "Likelihood-free Gaussian process regression")]
pub struct Cli {
    /// TOML file with one table per subcommand; flags given on the command
    /// line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic Cube or Roll dataset.
    Generate(GenerateArgs),
    /// Fit a model to a dataset and save it.
    Fit(FitArgs),
    /// Evaluate a saved model on a grid or query file.
    Predict(PredictArgs),
    /// Time fits over a grid of sizes and minimum cluster sizes.
    Bench(BenchArgs),
    /// Train and evaluate the binary-option strategies on a rate series.
    Backtest(BacktestArgs),
    /// Write a synthetic random-walk rate series.
    SynthRates(SynthRatesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClusterModeArg {
    Rescaled,
    Euclidean,
}

impl From<ClusterModeArg> for ClusterMode {
    fn from(m: ClusterModeArg) -> Self {
        match m {
            ClusterModeArg::Rescaled => ClusterMode::Rescaled,
            ClusterModeArg::Euclidean => ClusterMode::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Proposal,
    Baseline,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "cube|roll")]
    pub kind: Generator,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// mean, median, variance, skew or percentile:<q>
    #[arg(long, default_value = "mean")]
    pub statistic: StatisticKind,
    /// Minimum cluster size.
    #[arg(long, default_value_t = 1000)]
    pub n0: usize,
    /// Stop when a round gains no more than this much log likelihood.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// none, lle or isomap
    #[arg(long, default_value = "none")]
    pub embedding: EmbeddingMethod,
    /// Neighbors in the embedding graph.
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub target_dim: usize,
    /// Synthetic grid embedded alongside the data (defaults to the
    /// dataset's own generator when an embedding is used).
    #[arg(long, value_name = "cube|roll")]
    pub grid: Option<Generator>,
    #[arg(long, default_value_t = 30)]
    pub n_star: usize,
    /// CSV of query points to embed alongside the data.
    #[arg(long, value_name = "PATH")]
    pub queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rescaled")]
    pub cluster_mode: ClusterModeArg,
    /// Treat the cluster statistics as exact instead of noisy.
    #[arg(long)]
    pub noise_free: bool,
    #[arg(long, default_value_t = 20)]
    pub max_outer_iters: usize,
    #[arg(long, default_value_t = 200)]
    pub bootstrap_reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub model_out: PathBuf,
    /// Also write the fit report CSV here.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[arg(long, value_name = "cube|roll")]
    pub grid: Option<Generator>,
    #[arg(long, default_value_t = 30)]
    pub n_star: usize,
    #[arg(long, value_name = "PATH")]
    pub queries: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also draw the predicted (and, when known, true) curve as SVG.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "100000,200000")]
    pub n: List<usize>,
    #[arg(long, default_value = "1000,10000")]
    pub n0: List<usize>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, value_name = "cube|roll", default_value = "cube")]
    pub kind: Generator,
    #[arg(long, default_value = "mean")]
    pub statistic: StatisticKind,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Summary CSV; printed to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// One fit report row per individual fit.
    #[arg(long, value_name = "PATH")]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BacktestArgs {
    #[arg(long, value_name = "PATH")]
    pub rates: PathBuf,
    #[arg(long, default_value = "GBP/JPY")]
    pub instrument: String,
    #[arg(long, default_value_t = 0.01)]
    pub pip_size: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[arg(long, default_value = "0.5,0.4,0.3,0.2,0.1")]
    pub alpha: List<f64>,
    /// Share of the series' time span used for training.
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    /// Explicit train/evaluation boundary (RFC 3339); overrides the fraction.
    #[arg(long, value_name = "TIME")]
    pub split: Option<String>,
    /// Strategy TOML; the flags below override its values.
    #[arg(long, value_name = "PATH")]
    pub strategy: Option<PathBuf>,
    #[arg(long)]
    pub feature_lag: Option<usize>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub entry_threshold: Option<f64>,
    #[arg(long)]
    pub payout: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub utc_offset: Option<i32>,
    #[arg(long)]
    pub open_hour: Option<u32>,
    #[arg(long)]
    pub close_hour: Option<u32>,
    #[arg(long, value_name = "PATH")]
    pub holidays: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SynthRatesArgs {
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7.0)]
    pub days: f64,
    /// Seconds between quotes.
    #[arg(long, default_value_t = 10)]
    pub step: i64,
    /// First quote time (RFC 3339).
    #[arg(long, value_name = "TIME")]
    pub start: Option<String>,
    #[arg(long)]
    pub initial_rate: Option<f64>,
    #[arg(long)]
    pub volatility: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub pip_size: Option<f64>,
    #[arg(long)]
    pub gap_probability: Option<f64>,
    #[arg(long)]
    pub gap_seconds: Option<i64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
