use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fdal", version, about = "Sparse function-on-function regression")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario with train/test data and ground truth.
    Simulate(SimulateArgs),
    /// Fit at a single penalty pair.
    Fit(FitArgs),
    /// Run the penalty path with model selection.
    Path(PathArgs),
    /// Score an estimate against ground truth on a test set.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Easy,
    Difficult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Functional,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Gcv,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdaptiveArg {
    None,
    Full,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverModeArg {
    Auto,
    Direct,
    Woodbury,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON scenario file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub p0: Option<usize>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid size on [0, 1].
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

/// Options shared by `fit` and `path`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults to the response kind recorded in the manifest.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub variance_threshold: Option<f64>,
    /// Fixed number of FPCs.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n_lambda: Option<usize>,
    #[arg(long)]
    pub c_min: Option<f64>,
    #[arg(long)]
    pub max_selected: Option<usize>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long, value_enum)]
    pub adaptive: Option<AdaptiveArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outer KKT tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub sigma_growth: Option<f64>,
    #[arg(long, value_enum)]
    pub solver_mode: Option<SolverModeArg>,
    /// Solve every path point on all blocks instead of a screened working set.
    #[arg(long)]
    pub no_screening: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Penalty level relative to lambda_max.
    #[arg(long, conflicts_with_all = ["lambda1", "lambda2"])]
    pub c_lambda: Option<f64>,
    #[arg(long, requires = "lambda2")]
    pub lambda1: Option<f64>,
    #[arg(long, requires = "lambda1")]
    pub lambda2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory with `surfaces.json` of the estimate (a run directory).
    #[arg(long)]
    pub estimate: PathBuf,
    /// Directory with the true surfaces (`<scenario>/truth` or a scenario root).
    #[arg(long)]
    pub truth: PathBuf,
    /// Manifest of the test dataset.
    #[arg(long)]
    pub test: PathBuf,
    /// Also write the metrics to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
