use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "robustbar",
    version,
    about = "Calibration and robust pricing with one-touch quotes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the static no-arbitrage screens on a quote file.
    Check {
        #[command(flatten)]
        input: InputArgs,
        /// Also write the validation report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate a decomposition, or write an arbitrage certificate.
    Calibrate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Decomposition (or certificate) JSON; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the joint law of terminal price and running maximum.
    Joint {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Output prefix: writes `<out>.pmf.csv` and `<out>.tails.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Price an up-and-out put with knock-out at a model level.
    Price {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// 1-based maturity index.
        #[arg(long)]
        maturity: usize,
        #[arg(long)]
        strike: f64,
        /// Knock-out level; must be a barrier level of the model.
        #[arg(long)]
        barrier: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Robust bound on the one-touch price at an unquoted level.
    Bounds {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// 1-based maturity index.
        #[arg(long)]
        maturity: usize,
        #[arg(long)]
        barrier: f64,
        #[arg(long, value_enum)]
        side: SideArg,
        /// Bound result JSON with dual prices and the optimal model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// State-dependent variance σ²(x, band) as CSV.
    Vol {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// 1-based maturity index.
        #[arg(long)]
        maturity: usize,
        /// Exponential maturity-clock rate.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Quote JSON, or a decomposition JSON written by `calibrate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the support bound N of the quote file.
    #[arg(long)]
    pub upper_bound: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Equally spaced nodes inserted into every base grid cell.
    #[arg(long, default_value_t = 2)]
    pub refine: usize,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Feasibility)]
    pub objective: ObjectiveArg,
    /// Primal feasibility tolerance of the solver.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Feasibility,
    Regularize,
}
