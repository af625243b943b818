use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordpat::changepoint::Method;
use ordpat::LagSet;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "ordpat",
    version,
    about = "Ordinal pattern statistics for univariate time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pattern frequencies per lag and their mean.
    Patterns(PatternsArgs),
    /// Turning rate, up-down balance, persistence and entropies.
    Summary(SummaryArgs),
    /// Monte Carlo goodness of fit of the pattern distribution to Brownian motion.
    TestBm(TestBmArgs),
    /// Turning-point and up-step tests against i.i.d. and Brownian nulls.
    Bienayme(BienaymeArgs),
    /// Global change-point curve and its maximum.
    Changepoint(ChangepointArgs),
    /// Binary segmentation by repeated global search.
    Segment(SegmentArgs),
    /// Windowed before/after comparison.
    Local(LocalArgs),
    /// Simulate Brownian motion or an AR(1) process.
    Simulate(SimulateArgs),
    /// Variance of turning rate and up-down balance against the lag.
    VarianceLag(VarianceLagArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Patterns(_) => "patterns",
            Command::Summary(_) => "summary",
            Command::TestBm(_) => "test-bm",
            Command::Bienayme(_) => "bienayme",
            Command::Changepoint(_) => "changepoint",
            Command::Segment(_) => "segment",
            Command::Local(_) => "local",
            Command::Simulate(_) => "simulate",
            Command::VarianceLag(_) => "variance-lag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingArg {
    Drop,
    Fail,
}

/// Ad hoc WTI segments, as inclusive date ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 1986-01-02 to 2001-10-16, no visible trend.
    #[value(name = "wti-1986-2001")]
    Wti1986To2001,
    /// 2001-10-17 to 2008-07-07, rising prices.
    #[value(name = "wti-2001-08")]
    Wti2001To08,
    /// 2008-12-26 to 2014-07-22, rising prices.
    #[value(name = "wti-2009-14")]
    Wti2009To14,
    /// 2014-07-23 to 2019-09-03, no visible trend.
    #[value(name = "wti-2015-19")]
    Wti2015To19,
}

impl Preset {
    pub fn label_range(self) -> (&'static str, &'static str) {
        match self {
            Preset::Wti1986To2001 => ("1986-01-02", "2001-10-16"),
            Preset::Wti2001To08 => ("2001-10-17", "2008-07-07"),
            Preset::Wti2009To14 => ("2008-12-26", "2014-07-22"),
            Preset::Wti2015To19 => ("2014-07-23", "2019-09-03"),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// CSV file with one value per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Value column, by header name or 0-based position.
    #[arg(long, default_value = "1")]
    pub column: String,
    /// Label column (dates). Defaults to column 0 unless that is the value column.
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Treat the first row as data.
    #[arg(long)]
    pub no_header: bool,
    /// Take natural logarithms before analysis.
    #[arg(long)]
    pub log: bool,
    /// Tie-breaking noise as a multiple of the interquartile range; 0 disables it.
    #[arg(long, default_value_t = 1e-7)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub jitter_seed: u64,
    #[arg(long, value_enum, default_value_t = MissingArg::Drop)]
    pub missing: MissingArg,
    /// Rows whose labels lie between two prefixes, e.g. `2015:2019`.
    #[arg(long, conflicts_with_all = ["rows", "preset"])]
    pub range: Option<String>,
    /// Rows by 0-based position, `start:end` with `end` excluded; either side may be empty.
    #[arg(long, conflicts_with = "preset")]
    pub rows: Option<String>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// `json`, `csv`, or a file path whose extension selects the format.
    #[arg(long, default_value = "json")]
    pub out: String,
    /// Output file; relative paths are placed under `ORDPAT_OUTPUT_DIR` when set.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PatternsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value = "1")]
    pub lags: LagSet,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SummaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "1")]
    pub lags: LagSet,
    /// Pattern order of the permutation entropy.
    #[arg(long, default_value_t = 3)]
    pub entropy_order: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TestBmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value = "1..3")]
    pub lags: LagSet,
    /// Number of simulated Brownian paths.
    #[arg(long = "N", default_value_t = 100_000)]
    pub simulations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BienaymeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Exact binomial p-values for the Brownian coin-toss test.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Bm,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    Gaussian,
    /// `1 - e` with `e` standard exponential.
    Exponential,
}

#[derive(Debug, Args, Serialize)]
pub struct ProcessArgs {
    /// AR(1) coefficient.
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long, default_value = "beta")]
    pub method: Method,
    /// Pattern order for `order` and `entropy`; defaults to 4 and 3.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, default_value = "1..3")]
    pub lags: LagSet,
    /// Excluded split points at each end; default `max(250, 5 * span)` capped at T/4.
    #[arg(long)]
    pub margin: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ChangepointArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub curve: CurveArgs,
    /// Null model for the significance of the curve maximum; omitted means no test.
    #[arg(long, value_enum)]
    pub null: Option<ModelArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "N", default_value_t = 1000)]
    pub simulations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub curve: CurveArgs,
    #[arg(long, default_value_t = 3)]
    pub max_points: usize,
    #[arg(long, default_value_t = 0)]
    pub min_segment: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct LocalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "beta")]
    pub method: Method,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, default_value = "1..3")]
    pub lags: LagSet,
    /// Values on each side of the split.
    #[arg(long)]
    pub window: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "T")]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VarianceLagArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Bm)]
    pub model: ModelArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "T", default_value_t = 2500)]
    pub len: usize,
    /// Number of simulated trajectories.
    #[arg(long = "N", default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value = "1..10")]
    pub lags: LagSet,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}
