use std::path::PathBuf;

use breaklab::dgp::Family;
use breaklab::limit_lab::FunctionalKind;
use breaklab::rng::DEFAULT_SEED;
use breaklab::StatKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "breaklab",
    version,
    about = "Structural-break statistics and Monte Carlo studies"
)]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Errors only
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one sample from a data-generating process and write it as CSV (t,y,x1..xp)
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Compute a break statistic on a sample CSV and optionally compare it with a critical value
    #[command(allow_negative_numbers = true)]
    Test(TestArgs),
    /// Full-sample OLS fit, residual partial sums and their second-moment matrix
    Fit(FitArgs),
    /// Tabulate quantiles of a simulated limit functional
    #[command(allow_negative_numbers = true)]
    Critvals(CritvalsArgs),
    /// Run a Monte Carlo size/power experiment from a JSON spec
    #[command(allow_negative_numbers = true)]
    Experiment(ExperimentArgs),
    /// Rejection rates under local-to-unity nulls over a (c, corr) grid
    #[command(allow_negative_numbers = true)]
    Distortion(DistortionArgs),
}

pub fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("`{s}` is not a u64 seed: {e}"))
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON object with DGP keys (family, T, s, beta_pre, beta_post, sigma_eps_sq,
    /// sigma_u_sq, sigma_eps_u, c, mu, x0, intercept). Flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// location | linear_regression | cointegration | predictive_lur | ar1
    #[arg(long)]
    pub family: Option<Family>,
    /// Sample size T (observations)
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Break fraction s in [0, 1]; the break index is floor(T s). 0 means no break [default: 0]
    #[arg(long)]
    pub s: Option<f64>,
    /// Pre-break coefficients, comma separated [default: 0]
    #[arg(long, visible_alias = "mu-pre", value_delimiter = ',')]
    pub beta_pre: Option<Vec<f64>>,
    /// Post-break coefficients, comma separated [default: same as pre-break]
    #[arg(long, visible_alias = "mu-post", value_delimiter = ',')]
    pub beta_post: Option<Vec<f64>>,
    /// Standard deviation of the regression innovation eps (sets sigma_eps_sq = value^2)
    #[arg(long, conflicts_with = "sigma_eps_sq")]
    pub sigma_eps: Option<f64>,
    /// Variance of eps [default: 1]
    #[arg(long)]
    pub sigma_eps_sq: Option<f64>,
    /// Standard deviation of the regressor innovation u (sets sigma_u_sq = value^2)
    #[arg(long, conflicts_with = "sigma_u_sq")]
    pub sigma_u: Option<f64>,
    /// Variance of u [default: 1]
    #[arg(long)]
    pub sigma_u_sq: Option<f64>,
    /// Covariance of eps and u [default: 0]
    #[arg(long)]
    pub sigma_eps_u: Option<f64>,
    /// Local-to-unity parameter: rho = 1 + c/T [default: 0]
    #[arg(long)]
    pub c: Option<f64>,
    /// Intercept of the predictive regression [default: 0]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Initial value of the integrated regressor [default: 0]
    #[arg(long)]
    pub x0: Option<f64>,
    /// Predictive regression without an intercept column
    #[arg(long)]
    pub no_intercept: bool,
    /// Master seed (decimal or 0x hex)
    #[arg(long, value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Stream id within the master seed
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Output CSV [default: stdout]. A provenance file <out>.provenance.json is written alongside
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SidedArg {
    /// sup of |path|
    Abs,
    /// sup of the signed path
    Signed,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OnSingularArg {
    /// Leave the break index out of the scan and warn
    Skip,
    /// Abort with exit code 3
    Fail,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    /// cusum | cusumsq | zmean | wald
    #[arg(long)]
    pub stat: StatKind,
    /// Trimming fraction in [0, 0.5) [default: 0 for cusum and cusumsq, 0.15 for zmean and wald]
    #[arg(long)]
    pub nu: Option<f64>,
    /// Significance level; the critical value is the table's 1 - level quantile
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Sample CSV with columns y and optionally t, x1..xp (no x columns: intercept only)
    #[arg(long)]
    pub input: PathBuf,
    /// Critical-value table JSON from `breaklab critvals`; without it no decision is made
    #[arg(long)]
    pub critvals: Option<PathBuf>,
    /// Sup of |path| or of the signed path [default: abs]
    #[arg(long, value_enum)]
    pub sided: Option<SidedArg>,
    /// CUSUM of squares normalized by the residual standard deviation instead of sd of squares
    #[arg(long)]
    pub paper_literal: bool,
    /// What to do when a regime fit is singular
    #[arg(long, value_enum, default_value = "skip")]
    pub on_singular: OnSingularArg,
    /// Write the statistic path as CSV (k,value)
    #[arg(long)]
    pub path_out: Option<PathBuf>,
    /// Output JSON [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Sample CSV
    #[arg(long)]
    pub input: PathBuf,
    /// Also fit the two regimes split after observation k
    #[arg(long)]
    pub k: Option<usize>,
    /// Output JSON [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CritvalsArgs {
    /// supabsbb | supqp | supabslurcusum | cvmp1trace
    #[arg(long)]
    pub kind: FunctionalKind,
    /// Dimension of the bridge
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Trimming fraction [default: 0.15 for supqp, 0 otherwise]
    #[arg(long)]
    pub nu: Option<f64>,
    /// Local-to-unity parameter (supabslurcusum only)
    #[arg(long)]
    pub c: Option<f64>,
    /// Correlation of the driving motions (supabslurcusum only) [default: 0]
    #[arg(long)]
    pub corr: Option<f64>,
    /// Quantile levels, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.90,0.95,0.99")]
    pub levels: Vec<f64>,
    /// Number of simulated draws
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    /// Grid steps on [0, 1]
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Master seed (decimal or 0x hex)
    #[arg(long, value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output JSON [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// Experiment spec JSON (dgp_grid, stat_kinds, nu, level, n_reps, table_source,
    /// master_seed, paths_sample). Flags override its values
    #[arg(long)]
    pub spec: PathBuf,
    /// Report CSV [default: stdout]. Writes <out>.provenance.json alongside
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: all cores]; results do not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
    /// Dump this many raw statistic paths per cell and statistic to <out>.paths.csv
    #[arg(long)]
    pub paths_sample: Option<usize>,
    /// Override master_seed (decimal or 0x hex)
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<u64>,
    /// Override n_reps (replications per cell)
    #[arg(long)]
    pub reps: Option<usize>,
    /// Override the significance level
    #[arg(long)]
    pub level: Option<f64>,
    /// Override the trimming fraction for every statistic
    #[arg(long)]
    pub nu: Option<f64>,
    /// Use these critical-value tables instead of the spec's table_source
    #[arg(long, value_delimiter = ',')]
    pub critvals: Option<Vec<PathBuf>>,
}

#[derive(Debug, Args, Serialize)]
pub struct DistortionArgs {
    /// Local-to-unity parameters c, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0,-5,-20,-200")]
    pub c_grid: Vec<f64>,
    /// Innovation correlations, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0,-0.5,-0.95")]
    pub corr_grid: Vec<f64>,
    /// Sample size T
    #[arg(long = "T", default_value_t = 500)]
    pub t: usize,
    /// Statistics, comma separated
    #[arg(long, value_delimiter = ',', default_value = "cusum,wald")]
    pub stats: Vec<StatKind>,
    /// Replications per cell
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Master seed (decimal or 0x hex)
    #[arg(long, value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Draws for the simulated stationary critical values
    #[arg(long, default_value_t = 20_000)]
    pub table_reps: usize,
    /// Grid steps for the simulated critical values
    #[arg(long, default_value_t = 2000)]
    pub table_steps: usize,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report CSV [default: stdout]. Writes <out>.provenance.json alongside
    #[arg(long)]
    pub out: Option<PathBuf>,
}
