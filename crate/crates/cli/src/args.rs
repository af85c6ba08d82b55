use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "krigeval", version, about = "Ordinary and Bayesian kriging with leave-one-out validation")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "KRIGEVAL_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a Gaussian random field and write it as `x,y,value` CSV.
    Simulate(SimulateArgs),
    /// Estimate parameters (MLE) or the range posterior and print them as JSON.
    Fit(ModelArgs),
    /// Predict at target locations; writes mean, variance and quantiles as CSV.
    Predict(PredictArgs),
    /// Leave-one-out validation; writes a JSON report and an α-curve CSV.
    Validate(ValidateArgs),
    /// Run one experiment suite and write its tables and a manifest.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ok,
    Bayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LooModeArg {
    Fixed,
    Reestimate,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// Covariance family: gaussian, exponential, matern (with --nu) or matern_<nu>.
    #[arg(long, default_value = "exponential")]
    pub family: String,

    /// Matérn smoothness (0.5, 1.5 or 2.5).
    #[arg(long)]
    pub nu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,

    /// Range φ.
    #[arg(long, default_value_t = 4.5)]
    pub phi: f64,

    /// Variance σ² (> 0).
    #[arg(long, default_value_t = 0.1)]
    pub sigma2: f64,

    /// Nugget variance τ², in the same units as σ².
    #[arg(long, default_value_t = 0.0)]
    pub tau2: f64,

    /// Constant mean β.
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,

    /// Regular k × k grid.
    #[arg(long, conflicts_with = "n")]
    pub grid: Option<usize>,

    /// Uniform random design of n points instead of a grid.
    #[arg(long)]
    pub n: Option<usize>,

    /// Domain `x_min,x_max,y_min,y_max`.
    #[arg(long, default_value = "0,10,0,10")]
    pub rect: String,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output CSV (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "ok")]
    pub method: MethodArg,

    /// Input `x,y,value` CSV.
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub family: FamilyArgs,

    /// Nugget as a fraction of σ² (default: 1e-6 for gaussian, 0 otherwise).
    #[arg(long)]
    pub tau2: Option<f64>,

    /// Posterior sample size.
    #[arg(long = "M", default_value_t = 1000)]
    pub draws: usize,

    /// Range support: `COUNT` (from d_max/100 to d_max) or `LO:HI:COUNT`.
    #[arg(long)]
    pub phi_grid: Option<String>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Target `x,y` CSV.
    #[arg(long, conflicts_with = "grid")]
    pub targets: Option<PathBuf>,

    /// Regular k × k target grid over the data bounding box.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long, value_enum, default_value = "fixed")]
    pub loo_mode: LooModeArg,

    /// Number of α levels, equally spaced in (0, 1).
    #[arg(long, default_value_t = 99)]
    pub alpha_levels: usize,

    /// α-curve CSV (defaults next to --out with an `_alpha.csv` suffix).
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// gp, covsel, function, resample, prior-sens, estimation or phi-posterior.
    #[arg(long)]
    pub suite: String,

    /// paper (R=100, M=1000) or smoke (R=10, M=200).
    #[arg(long, default_value = "smoke")]
    pub scale: String,

    /// Parent dataset CSV for the resample suite.
    #[arg(long)]
    pub data: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Override the replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Override the posterior sample size.
    #[arg(long = "M")]
    pub draws: Option<usize>,

    /// Comma-separated dataset sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,

    #[arg(long, value_enum, default_value = "fixed")]
    pub loo_mode: LooModeArg,

    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}
