//! `optsel`: trace generation, model fitting, recommendation and evaluation.
//!
//! Every subcommand writes only into `--out`. Options can also come from a
//! `key=value` file given with `--config`; keys are the long flag names and
//! flags win over the file.

mod artifacts;
mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "optsel", version, about = "Pick an optimizer and machine count from fitted time and convergence models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Key-value config file (`key=value` per line).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run each (algorithm, m) in the grid and write one trace per run.
    Run(RunArgs),
    /// Fit the per-iteration time model f(m) by NNLS.
    FitSystem(FitSystemArgs),
    /// Fit the convergence model g(i, m) on a directory of traces.
    FitConvergence(FitConvergenceArgs),
    /// Predict sub-optimality at (i, m) or (t, m).
    Predict(PredictArgs),
    /// Recommend (algorithm, m) for a target sub-optimality or a deadline.
    Recommend(RecommendArgs),
    /// Score the convergence model with an evaluation protocol.
    Eval(EvalArgs),
    /// Write a synthetic separable classification dataset in LIBSVM format.
    SynthData(SynthDataArgs),
    /// Write synthetic per-iteration timings from known coefficients.
    SynthTimings(SynthTimingsArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// LIBSVM dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Algorithms: cocoa, cocoa_plus, minibatch_sgd, full_gd [default: cocoa_plus].
    #[arg(long, value_delimiter = ',')]
    pub algorithm: Option<Vec<String>>,
    /// Machine counts [default: 1,2,4,...,128].
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    /// Regularization strength [default: 0.01].
    #[arg(long)]
    pub reg: Option<f64>,
    /// Local SDCA steps per round [default: one local epoch].
    #[arg(long)]
    pub local_iters: Option<usize>,
    /// Global SGD mini-batch [default: m].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 500]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop once primal sub-optimality is at or below this [default: 1e-4].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// measured or synthetic [default: measured].
    #[arg(long)]
    pub timing: Option<String>,
    /// System model used to stamp times in synthetic mode.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitSystemArgs {
    #[command(flatten)]
    pub common: Common,
    /// Timing CSV with columns m,size,time_s.
    #[arg(long, conflicts_with = "traces")]
    pub timings: Option<PathBuf>,
    /// Directory of traces to take median iteration times from.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Keep traces of this algorithm; also recorded in the model.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// ernest or extended [default: ernest].
    #[arg(long)]
    pub basis: Option<String>,
    /// Output file name [default: system_<algorithm>.model or system.model].
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct FitConvergenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of traces.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Cross-validation folds [default: 5].
    #[arg(long)]
    pub folds: Option<usize>,
    /// support or lasso [default: support].
    #[arg(long)]
    pub refit: Option<String>,
    /// Force lasso_cv or ols [default: automatic].
    #[arg(long)]
    pub method: Option<String>,
    /// Reference optimum; read from trace metadata when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub p_star: Option<f64>,
    #[arg(long)]
    pub p_star_gap: Option<f64>,
    /// [default: convergence_<algorithm>.model]
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub convergence: Option<PathBuf>,
    /// Needed only when neither model records its algorithm.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    /// Iteration counts to query.
    #[arg(long, value_delimiter = ',', conflicts_with = "t")]
    pub i: Option<Vec<f64>>,
    /// Wall-clock seconds to query.
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// [default: prediction.csv]
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub common: Common,
    /// System models, paired by position with --convergence.
    #[arg(long, value_delimiter = ',')]
    pub system: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub convergence: Option<Vec<String>>,
    /// Target sub-optimality; minimizes predicted time.
    #[arg(long, conflicts_with = "deadline")]
    pub epsilon: Option<f64>,
    /// Time budget in seconds; minimizes predicted sub-optimality.
    #[arg(long)]
    pub deadline: Option<f64>,
    /// [default: 1,2,4,...,128]
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    /// [default: recommendation.csv]
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// loo-m, forward-iters, forward-time or fit.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Restrict forward protocols to these m.
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub refit: Option<String>,
    /// Window in iterations for forward-iters [default: 50].
    #[arg(long)]
    pub window: Option<usize>,
    /// Horizons in iterations for forward-iters [default: 1,10].
    #[arg(long, value_delimiter = ',')]
    pub horizon: Option<Vec<usize>>,
    /// Window in seconds for forward-time.
    #[arg(long)]
    pub window_s: Option<f64>,
    /// Horizons in seconds for forward-time.
    #[arg(long, value_delimiter = ',')]
    pub horizon_s: Option<Vec<f64>>,
    /// System model for forward-time.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub p_star: Option<f64>,
    #[arg(long)]
    pub p_star_gap: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SynthDataArgs {
    #[command(flatten)]
    pub common: Common,
    /// [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// [default: 20]
    #[arg(long)]
    pub d: Option<usize>,
    /// [default: 0.1]
    #[arg(long)]
    pub margin: Option<f64>,
    /// Fraction of flipped labels [default: 0].
    #[arg(long)]
    pub noise: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: data.libsvm]
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct SynthTimingsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Four non-negative coefficients for [1, size/m, ln m, m].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    /// Input size, e.g. the number of examples.
    #[arg(long)]
    pub size: Option<f64>,
    /// [default: 1,2,4,...,128]
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    /// Relative multiplicative noise [default: 0].
    #[arg(long)]
    pub noise: Option<f64>,
    /// [default: 3]
    #[arg(long)]
    pub repeats: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: timings.csv]
    #[arg(long)]
    pub name: Option<String>,
}

/// Exit code when some artifacts were written but a run diverged, an
/// evaluation was skipped, or no feasible configuration exists. Usage errors
/// exit with 2 and all other failures with 1.
pub const EXIT_PARTIAL: u8 = 3;

pub enum Outcome {
    Complete,
    Partial(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::FitSystem(a) => commands::fit_system(a),
        Command::FitConvergence(a) => commands::fit_convergence(a),
        Command::Predict(a) => commands::predict(a),
        Command::Recommend(a) => commands::recommend(a),
        Command::Eval(a) => commands::eval(a),
        Command::SynthData(a) => commands::synth_data(a),
        Command::SynthTimings(a) => commands::synth_timings(a),
    };
    match result {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(why)) => {
            eprintln!("partial: {why}");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
