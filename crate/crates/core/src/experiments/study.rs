//! Convergence studies: error versus sample size for one estimator family.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::linear_ot_baseline;
use super::hockey::{uniform_sample, HockeyStickMap};
use super::metrics::{l2_error_on, loglog_regression, ErrorEstimate, LogLogFit, DEFAULT_MC_SIZE};
use crate::conjugate::ConjugateConfig;
use crate::discrete::{sample_sobolev_ellipsoid, NnPlanEstimator};
use crate::error::{Error, Result};
use crate::neural::{preset_config, train_nn, NnConfig, Preset};
use crate::rng::named_seed;
use crate::semidual::{fit, FitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Fourier,
    Nn,
    Nnplan,
    Linear,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Fourier => "fourier",
            EstimatorKind::Nn => "nn",
            EstimatorKind::Nnplan => "nnplan",
            EstimatorKind::Linear => "linear",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(EstimatorKind::Fourier),
            "nn" => Ok(EstimatorKind::Nn),
            "nnplan" => Ok(EstimatorKind::Nnplan),
            "linear" => Ok(EstimatorKind::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator `{other}` (expected fourier, nn, nnplan or linear)"
            ))),
        }
    }
}

/// Source distribution of a study. The target is always the hockey-stick push-forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// `P = Unif[0,1]^d`.
    Hockey,
    /// `P` = the truncated Sobolev-ellipsoid sampler with smoothness `b`.
    Ellipsoid { b: f64 },
}

/// Optional overrides of the neural preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnOverrides {
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub estimator: EstimatorKind,
    pub task: Task,
    pub q: f64,
    pub d: usize,
    pub ns: Vec<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    #[serde(default = "default_mc")]
    pub mc_points: usize,
    /// Measure errors on the first `k` coordinates only.
    #[serde(default)]
    pub error_dims: Option<usize>,
    #[serde(default = "default_preset")]
    pub nn_preset: Preset,
    #[serde(default)]
    pub nn_overrides: NnOverrides,
    /// Fourier budget `J`; `select_J(n)` when absent.
    #[serde(default)]
    pub fourier_j: Option<f64>,
    #[serde(default)]
    pub fourier: FitConfig,
    /// Replaces the estimator's own conjugate-solver settings when present.
    #[serde(default)]
    pub conjugate: Option<ConjugateConfig>,
}

fn default_mc() -> usize {
    DEFAULT_MC_SIZE
}

fn default_preset() -> Preset {
    Preset::Sim7
}

impl StudyConfig {
    pub fn new(estimator: EstimatorKind, q: f64, d: usize, ns: Vec<usize>, seeds: usize, base_seed: u64) -> Self {
        Self {
            estimator,
            task: Task::Hockey,
            q,
            d,
            ns,
            seeds,
            base_seed,
            mc_points: DEFAULT_MC_SIZE,
            error_dims: None,
            nn_preset: Preset::Sim7,
            nn_overrides: NnOverrides::default(),
            fourier_j: None,
            fourier: FitConfig::default(),
            conjugate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        HockeyStickMap::new(self.d, self.q)?;
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidArgument("sample sizes must be positive and non-empty".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidArgument("at least one seed is required".into()));
        }
        if self.mc_points == 0 {
            return Err(Error::InvalidArgument("Monte Carlo size is 0".into()));
        }
        if let Task::Ellipsoid { b } = self.task {
            if !(b > 0.0) {
                return Err(Error::InvalidArgument(format!("ellipsoid smoothness {b} must be positive")));
            }
        }
        Ok(())
    }

    /// Neural configuration used for one cell.
    pub fn nn_config(&self, n: usize, seed: u64) -> Result<NnConfig> {
        let map = HockeyStickMap::new(self.d, self.q)?.smoothness_map();
        let mut cfg = preset_config(self.nn_preset, &map, n, self.d, seed)?;
        if let Some(it) = self.nn_overrides.iterations {
            cfg.iterations = it;
        }
        if let Some(lr) = self.nn_overrides.learning_rate {
            cfg.learning_rate = lr;
        }
        if let Some(b) = self.nn_overrides.batch_size {
            cfg.batch_size = b;
        }
        if let Some(c) = self.conjugate {
            cfg.conjugate = ConjugateConfig { seed, ..c };
        }
        Ok(cfg)
    }
}

/// One `(n, seed)` cell of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub estimator: EstimatorKind,
    pub q: f64,
    pub d: usize,
    pub n: usize,
    pub seed: usize,
    pub error: f64,
    pub se: f64,
}

/// Seed-averaged error at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanError {
    pub n: usize,
    pub error: f64,
    /// Standard error of the mean across seeds (0 with one seed).
    pub se_across_seeds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: StudyConfig,
    pub version: String,
    pub records: Vec<ErrorRecord>,
    pub mean_errors: Vec<MeanError>,
    /// Regression of mean error on `n`; absent with fewer than two sample sizes.
    pub fit: Option<LogLogFit>,
    /// `−2a₁/(2a₁+1)` with `a₁ = q − 0.4` as stated in the paper.
    pub theory_exponent: f64,
    pub paper_a1: f64,
    /// `κ(1) + 1/2`, the first weight implied by the displayed `κ`.
    pub kappa1_plus_half: f64,
    /// The paper's two lists of theoretical exponents for `q = 1, 1.3, 2`.
    pub paper_bounds_first: [f64; 3],
    pub paper_bounds_second: [f64; 3],
    /// Slopes the paper reports at `d = 200` for `q = 1, 1.3, 2`.
    pub paper_slopes: [f64; 3],
}

pub const PAPER_BOUNDS_FIRST: [f64; 3] = [-0.76, -0.79, -0.84];
pub const PAPER_BOUNDS_SECOND: [f64; 3] = [-0.81, -0.86, -0.91];
pub const PAPER_SLOPES: [f64; 3] = [-0.77, -0.83, -0.95];

/// Source sample, target sample and Monte Carlo probe for one cell.
pub fn cell_data(cfg: &StudyConfig, n: usize, seed: usize) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let map = HockeyStickMap::new(cfg.d, cfg.q)?;
    let s = named_seed(cfg.base_seed, &format!("cell-{n}-{seed}"));
    let draw = |count: usize, stream: u64| match cfg.task {
        Task::Hockey => uniform_sample(count, cfg.d, s, stream),
        Task::Ellipsoid { b } => sample_sobolev_ellipsoid(b, cfg.d, count, named_seed(s, &stream.to_string())),
    };
    let x = draw(n, 1);
    let mut y = draw(n, 2);
    for mut r in y.rows_mut() {
        for (i, v) in r.iter_mut().enumerate() {
            *v = map.eval_axis(i + 1, *v);
        }
    }
    let probe = draw(cfg.mc_points, 3);
    Ok((x, y, probe))
}

/// Fits the configured estimator on one cell and returns its Monte Carlo error.
pub fn run_cell(cfg: &StudyConfig, n: usize, seed: usize) -> Result<ErrorEstimate> {
    let map = HockeyStickMap::new(cfg.d, cfg.q)?;
    let (x, y, probe) = cell_data(cfg, n, seed)?;
    let truth = |p: &[f64]| map.eval(p);
    let fit_seed = named_seed(cfg.base_seed, &format!("fit-{n}-{seed}"));
    match cfg.estimator {
        EstimatorKind::Fourier => {
            let mut fc = cfg.fourier;
            fc.conjugate = cfg.conjugate.unwrap_or(fc.conjugate);
            fc.conjugate.seed = fit_seed;
            let f = fit(x.view(), y.view(), map.smoothness_map(), cfg.fourier_j, &fc)?;
            l2_error_on(|p| f.transport(p), truth, &probe, cfg.error_dims)
        }
        EstimatorKind::Nn => {
            let nc = cfg.nn_config(n, fit_seed)?;
            let t = train_nn(x.view(), y.view(), &nc)?;
            l2_error_on(|p| t.transport(p), truth, &probe, cfg.error_dims)
        }
        EstimatorKind::Nnplan => {
            let e = NnPlanEstimator::fit(x, y, cfg.d)?;
            l2_error_on(|p| e.transport(p), truth, &probe, cfg.error_dims)
        }
        EstimatorKind::Linear => {
            let l = linear_ot_baseline(x.view(), y.view())?;
            l2_error_on(|p| l.transport(p), truth, &probe, cfg.error_dims)
        }
    }
}

/// Builds a report from per-cell errors (also used to check the regression on injected data).
pub fn summarize(cfg: &StudyConfig, records: Vec<ErrorRecord>) -> ExperimentReport {
    let mut mean_errors = Vec::new();
    for &n in &cfg.ns {
        let errs: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.error).collect();
        if errs.is_empty() {
            continue;
        }
        let k = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / k;
        let se = if errs.len() > 1 {
            (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        mean_errors.push(MeanError {
            n,
            error: mean,
            se_across_seeds: se,
        });
    }
    let points: Vec<(f64, f64)> = mean_errors.iter().map(|m| (m.n as f64, m.error)).collect();
    let hockey = HockeyStickMap { d: cfg.d, q: cfg.q };
    ExperimentReport {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        records,
        fit: loglog_regression(&points),
        mean_errors,
        theory_exponent: hockey.theory_exponent(),
        paper_a1: hockey.paper_a1(),
        kappa1_plus_half: hockey.kappa(1) + 0.5,
        paper_bounds_first: PAPER_BOUNDS_FIRST,
        paper_bounds_second: PAPER_BOUNDS_SECOND,
        paper_slopes: PAPER_SLOPES,
    }
}

/// Runs every `(n, seed)` cell and regresses seed-averaged errors on `n`.
///
/// Cells run in parallel; their results are gathered in `(n, seed)` order so
/// the report does not depend on scheduling.
pub fn convergence_study(cfg: &StudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .ns
        .iter()
        .flat_map(|&n| (0..cfg.seeds).map(move |s| (n, s)))
        .collect();
    let results: Vec<Result<ErrorRecord>> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let e = run_cell(cfg, n, seed)?;
            Ok(ErrorRecord {
                estimator: cfg.estimator,
                q: cfg.q,
                d: cfg.d,
                n,
                seed,
                error: e.mean,
                se: e.se,
            })
        })
        .collect();
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarize(cfg, records))
}
