//! `otmap`: fit, apply and evaluate optimal transport map estimators.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otmap_core::conjugate::ConjugateConfig;

#[derive(Debug, Parser)]
#[command(name = "otmap", version, about = "Semi-dual optimal transport map estimation")]
pub struct Cli {
    /// Seed for all randomness.
    #[arg(long, global = true, env = "OTMAP_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads. Runs with 1 thread are bitwise reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a hockey-stick source/target pair as CSV.
    GenData(GenDataArgs),
    /// Fit the truncated Fourier semi-dual estimator.
    FitFourier(FitFourierArgs),
    /// Train the neural semi-dual estimator.
    FitNn(FitNnArgs),
    /// Fit the nearest-neighbour plug-in estimator on an exact assignment.
    FitNnplan(FitPlanArgs),
    /// Apply a saved model to points.
    Transport(TransportArgs),
    /// Error-versus-n study on the hockey-stick task.
    Sim7(Sim7Args),
    /// Lower-bound hypothesis fixture.
    FixtureLb(FixtureArgs),
    /// Transport functional data through cosine coefficients.
    Fda(FdaArgs),
    /// Monte Carlo L² error of a saved model against a known map.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Hockey,
    Identity,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "hockey")]
    pub task: TaskArg,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    /// Output directory for x.csv and y.csv.
    #[arg(long)]
    pub out: PathBuf,
}

/// Overrides for the conjugate solver.
#[derive(Debug, Args, Clone, Copy, Default)]
pub struct ConjugateArgs {
    #[arg(long)]
    pub conj_tol: Option<f64>,
    #[arg(long)]
    pub conj_max_iter: Option<usize>,
    #[arg(long)]
    pub conj_starts: Option<usize>,
}

impl ConjugateArgs {
    pub fn any(&self) -> bool {
        self.conj_tol.is_some() || self.conj_max_iter.is_some() || self.conj_starts.is_some()
    }

    pub fn apply(&self, base: ConjugateConfig) -> ConjugateConfig {
        ConjugateConfig {
            tol: self.conj_tol.unwrap_or(base.tol),
            max_iter: self.conj_max_iter.unwrap_or(base.max_iter),
            starts: self.conj_starts.unwrap_or(base.starts),
            seed: base.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Source sample CSV (one point per row).
    #[arg(long)]
    pub x: PathBuf,
    /// Target sample CSV.
    #[arg(long)]
    pub y: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitFourierArgs {
    #[command(flatten)]
    pub samples: SampleArgs,
    /// Smoothness map JSON; a mixed map with a_i = i when absent.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Budget J; select_J(n) when absent.
    #[arg(long)]
    pub j: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[command(flatten)]
    pub conjugate: ConjugateArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Sim7,
    Theory,
}

#[derive(Debug, Args)]
pub struct NnTrainArgs {
    #[arg(long, value_enum, default_value = "sim7")]
    pub preset: PresetArg,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitNnArgs {
    #[command(flatten)]
    pub samples: SampleArgs,
    /// Smoothness map JSON; a mixed map with a_i = i when absent.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[command(flatten)]
    pub train: NnTrainArgs,
    #[command(flatten)]
    pub conjugate: ConjugateArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitPlanArgs {
    #[command(flatten)]
    pub samples: SampleArgs,
    /// Leading coordinates used for costs; all when absent.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Fourier,
    Nn,
    Nnplan,
    Linear,
}

#[derive(Debug, Args)]
pub struct Sim7Args {
    /// Replay a resolved configuration (a study config or a run echo).
    #[arg(long, conflicts_with_all = [
        "estimator", "q", "d", "ns", "seeds", "ellipsoid_b", "mc", "error_dims",
        "iterations", "learning_rate", "batch_size", "conj_tol", "conj_max_iter", "conj_starts",
    ])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Draw sources from the Sobolev ellipsoid with this smoothness instead of the cube.
    #[arg(long)]
    pub ellipsoid_b: Option<f64>,
    /// Monte Carlo probe size.
    #[arg(long)]
    pub mc: Option<usize>,
    /// Measure the error on the leading coordinates only.
    #[arg(long)]
    pub error_dims: Option<usize>,
    #[command(flatten)]
    pub train: NnTrainArgs,
    #[command(flatten)]
    pub conjugate: ConjugateArgs,
    /// Report path; errors.csv and mean_errors.csv go to the same directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long = "S", alias = "s", default_value_t = 1)]
    pub s: u32,
    /// Number of hypotheses.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc: usize,
    /// Smoothness map JSON; Sobolev H^1 on d axes when absent.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FdaArgs {
    /// Source functions (first row: grid abscissae).
    #[arg(long)]
    pub source: PathBuf,
    /// Target functions on the same grid.
    #[arg(long)]
    pub target: PathBuf,
    /// JSON sidecar {rows, cols} marking both files as flattened planar grids.
    #[arg(long)]
    pub plane: Option<PathBuf>,
    /// Cosine coefficients kept per function (per axis for planar data).
    #[arg(long, default_value_t = 10)]
    pub n_coeffs: usize,
    #[arg(long, value_enum, default_value = "linear")]
    pub estimator: EstimatorArg,
    #[command(flatten)]
    pub train: NnTrainArgs,
    #[command(flatten)]
    pub conjugate: ConjugateArgs,
    /// Transported functions CSV; metrics go to `<stem>.metrics.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Reference map.
    #[arg(long, value_enum, default_value = "hockey")]
    pub truth: TaskArg,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, default_value_t = 2000)]
    pub mc: usize,
    #[arg(long)]
    pub error_dims: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
