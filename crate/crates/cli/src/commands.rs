use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;
use ndarray::{concatenate, Array2, Axis};
use otmap_core::discrete::NnPlanEstimator;
use otmap_core::experiments::{
    convergence_study, gen_pushforward_data, l2_error_on, linear_ot_baseline, lower_bound_fixture,
    uniform_sample, EstimatorKind, ExperimentReport, HockeyStickMap, StudyConfig, Task,
};
use otmap_core::fda::{avg_dtw, calibrate, to_coeffs, transport_functions, FunctionSample};
use otmap_core::gamma::{SmoothnessMap, WeightRule};
use otmap_core::model::{load_model, save_model, Estimator};
use otmap_core::neural::{preset_config, train_nn, NnConfig, Preset};
use otmap_core::rng::named_seed;
use otmap_core::semidual::{fit, FitConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{
    ensure_parent, read_functions, read_matrix, sibling, write_functions, write_json, write_matrix, write_timing,
    RunEcho,
};
use crate::{
    Cli, Command, ConjugateArgs, EstimatorArg, EvalArgs, FdaArgs, FitFourierArgs, FitNnArgs, FitPlanArgs,
    FixtureArgs, GenDataArgs, NnTrainArgs, PresetArg, Sim7Args, TaskArg, TransportArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let started = Instant::now();
    let ctx = Ctx { seed: cli.seed, threads: cli.threads };
    let timing_anchor = match &cli.command {
        Command::GenData(a) => gen_data(&ctx, a).map(|()| a.out.join("data"))?,
        Command::FitFourier(a) => fit_fourier(&ctx, a).map(|()| a.out.clone())?,
        Command::FitNn(a) => fit_nn(&ctx, a).map(|()| a.out.clone())?,
        Command::FitNnplan(a) => fit_nnplan(&ctx, a).map(|()| a.out.clone())?,
        Command::Transport(a) => transport(&ctx, a).map(|()| a.out.clone())?,
        Command::Sim7(a) => sim7(&ctx, a).map(|()| a.out.clone())?,
        Command::FixtureLb(a) => fixture(&ctx, a).map(|()| a.out.clone())?,
        Command::Fda(a) => fda(&ctx, a).map(|()| a.out.clone())?,
        Command::Eval(a) => {
            eval(&ctx, a)?;
            match &a.out {
                Some(p) => p.clone(),
                None => return Ok(()),
            }
        }
    };
    write_timing(&timing_anchor, started.elapsed().as_secs_f64())
}

struct Ctx {
    seed: u64,
    threads: usize,
}

impl Ctx {
    fn echo<C: Serialize>(&self, command: &str, out: &Path, inputs: &[&Path], config: C) -> Result<()> {
        let echo = RunEcho::new(command, self.seed, self.threads, inputs, config)?;
        write_json(&sibling(out, "config.json"), &echo)
    }
}

fn default_map() -> SmoothnessMap {
    SmoothnessMap::mixed(WeightRule::power(1.0, 1.0))
}

fn load_map(path: Option<&Path>) -> Result<SmoothnessMap> {
    match path {
        None => Ok(default_map()),
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).map_err(|e| CliError::input(p, e)),
    }
}

fn load_samples(x: &Path, y: &Path) -> Result<(Array2<f64>, Array2<f64>)> {
    let (x, y) = (read_matrix(x)?, read_matrix(y)?);
    if x.ncols() != y.ncols() {
        return Err(otmap_core::Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        }
        .into());
    }
    Ok((x, y))
}

fn gen_data(ctx: &Ctx, a: &GenDataArgs) -> Result<()> {
    let (x, y) = match a.task {
        TaskArg::Hockey => gen_pushforward_data(&HockeyStickMap::new(a.d, a.q)?, a.n, ctx.seed),
        TaskArg::Identity => (uniform_sample(a.n, a.d, ctx.seed, 1), uniform_sample(a.n, a.d, ctx.seed, 2)),
    };
    fs::create_dir_all(&a.out)?;
    write_matrix(&a.out.join("x.csv"), &x)?;
    write_matrix(&a.out.join("y.csv"), &y)?;
    #[derive(Serialize)]
    struct Echo {
        task: &'static str,
        q: f64,
        d: usize,
        n: usize,
    }
    let task = match a.task {
        TaskArg::Hockey => "hockey",
        TaskArg::Identity => "identity",
    };
    ctx.echo("gen-data", &a.out.join("data"), &[], Echo { task, q: a.q, d: a.d, n: a.n })
}

fn fourier_config(ctx: &Ctx, max_iter: Option<usize>, conj: &ConjugateArgs, label: &str) -> FitConfig {
    let base = FitConfig::default();
    let mut c = FitConfig {
        max_iter: max_iter.unwrap_or(base.max_iter),
        conjugate: conj.apply(base.conjugate),
        ..base
    };
    c.conjugate.seed = named_seed(ctx.seed, label);
    c
}

fn fit_fourier(ctx: &Ctx, a: &FitFourierArgs) -> Result<()> {
    let (x, y) = load_samples(&a.samples.x, &a.samples.y)?;
    let map = load_map(a.map.as_deref())?;
    let cfg = fourier_config(ctx, a.max_iter, &a.conjugate, "fit-fourier");
    let f = fit(x.view(), y.view(), map, a.j, &cfg)?;
    info!("fourier fit: J = {}, {} terms, converged = {}", f.j, f.potential.coeffs().len(), f.converged);
    ensure_parent(&a.out)?;
    save_model(&a.out, &Estimator::Fourier(f.clone()))?;
    #[derive(Serialize)]
    struct Echo {
        map: SmoothnessMap,
        j: f64,
        fit: FitConfig,
    }
    ctx.echo(
        "fit-fourier",
        &a.out,
        &[&a.samples.x, &a.samples.y],
        Echo { map, j: f.j, fit: cfg },
    )
}

fn nn_config(ctx: &Ctx, map: &SmoothnessMap, n: usize, d: usize, t: &NnTrainArgs, c: &ConjugateArgs, label: &str) -> Result<NnConfig> {
    let preset = match t.preset {
        PresetArg::Sim7 => Preset::Sim7,
        PresetArg::Theory => Preset::Theory,
    };
    let seed = named_seed(ctx.seed, label);
    let mut cfg = preset_config(preset, map, n, d, seed)?;
    cfg.iterations = t.iterations.unwrap_or(cfg.iterations);
    cfg.learning_rate = t.learning_rate.unwrap_or(cfg.learning_rate);
    cfg.batch_size = t.batch_size.unwrap_or(cfg.batch_size);
    cfg.conjugate = c.apply(cfg.conjugate);
    Ok(cfg)
}

fn fit_nn(ctx: &Ctx, a: &FitNnArgs) -> Result<()> {
    let (x, y) = load_samples(&a.samples.x, &a.samples.y)?;
    let map = load_map(a.map.as_deref())?;
    let cfg = nn_config(ctx, &map, x.nrows(), x.ncols(), &a.train, &a.conjugate, "fit-nn")?;
    let t = train_nn(x.view(), y.view(), &cfg)?;
    ensure_parent(&a.out)?;
    save_model(&a.out, &Estimator::Nn(t))?;
    ctx.echo("fit-nn", &a.out, &[&a.samples.x, &a.samples.y], cfg)
}

fn fit_nnplan(ctx: &Ctx, a: &FitPlanArgs) -> Result<()> {
    let (x, y) = load_samples(&a.samples.x, &a.samples.y)?;
    if x.nrows() != y.nrows() {
        return Err(CliError::Usage(format!(
            "nearest-neighbour plans need equal sample sizes, got {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let dim = a.dim.unwrap_or(x.ncols());
    let e = NnPlanEstimator::fit(x, y, dim)?;
    ensure_parent(&a.out)?;
    save_model(&a.out, &Estimator::NnPlan(e))?;
    ctx.echo("fit-nnplan", &a.out, &[&a.samples.x, &a.samples.y], serde_json::json!({ "dim": dim }))
}

fn check_width(model: &Estimator, x: &Array2<f64>) -> Result<()> {
    let need = model.input_dim();
    let ok = match model {
        Estimator::Linear(_) => x.ncols() == need,
        _ => x.ncols() >= need,
    };
    if ok {
        Ok(())
    } else {
        Err(otmap_core::Error::DimensionMismatch {
            expected: need,
            got: x.ncols(),
        }
        .into())
    }
}

fn transport(ctx: &Ctx, a: &TransportArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let x = read_matrix(&a.x)?;
    check_width(&model, &x)?;
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| model.transport(&r.to_vec())).collect();
    let width = rows[0].len();
    let out = Array2::from_shape_vec((rows.len(), width), rows.into_iter().flatten().collect())
        .expect("rows have the model's output width");
    ensure_parent(&a.out)?;
    write_matrix(&a.out, &out)?;
    ctx.echo("transport", &a.out, &[&a.model, &a.x], serde_json::json!({ "kind": model.kind() }))
}

/// Either a bare study config or a run echo wrapping one.
#[derive(Deserialize)]
#[serde(untagged)]
enum StudyFile {
    Echo(RunEcho<StudyConfig>),
    Bare(StudyConfig),
}

fn study_config(ctx: &Ctx, a: &Sim7Args) -> Result<StudyConfig> {
    if let Some(p) = &a.config {
        let text = fs::read_to_string(p)?;
        let file: StudyFile = serde_json::from_str(&text).map_err(|e| CliError::input(p, e))?;
        return Ok(match file {
            StudyFile::Echo(e) => e.config,
            StudyFile::Bare(c) => c,
        });
    }
    let missing = |flag: &str| CliError::Usage(format!("sim7 needs --{flag} (or --config)"));
    let estimator = match a.estimator.ok_or_else(|| missing("estimator"))? {
        EstimatorArg::Fourier => EstimatorKind::Fourier,
        EstimatorArg::Nn => EstimatorKind::Nn,
        EstimatorArg::Nnplan => EstimatorKind::Nnplan,
        EstimatorArg::Linear => EstimatorKind::Linear,
    };
    let mut cfg = StudyConfig::new(
        estimator,
        a.q.ok_or_else(|| missing("q"))?,
        a.d.ok_or_else(|| missing("d"))?,
        a.ns.clone().ok_or_else(|| missing("ns"))?,
        a.seeds.ok_or_else(|| missing("seeds"))?,
        ctx.seed,
    );
    if let Some(b) = a.ellipsoid_b {
        cfg.task = Task::Ellipsoid { b };
    }
    cfg.mc_points = a.mc.unwrap_or(cfg.mc_points);
    cfg.error_dims = a.error_dims;
    cfg.nn_preset = match a.train.preset {
        PresetArg::Sim7 => Preset::Sim7,
        PresetArg::Theory => Preset::Theory,
    };
    cfg.nn_overrides.iterations = a.train.iterations;
    cfg.nn_overrides.learning_rate = a.train.learning_rate;
    cfg.nn_overrides.batch_size = a.train.batch_size;
    if a.conjugate.any() {
        cfg.conjugate = Some(a.conjugate.apply(Default::default()));
    }
    Ok(cfg)
}

fn write_study_csvs(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let path = dir.join("errors.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::output(&path, e))?;
    w.write_record(["estimator", "q", "d", "n", "seed", "error", "se"])
        .map_err(|e| CliError::output(&path, e))?;
    for r in &report.records {
        w.serialize((r.estimator.to_string(), r.q, r.d, r.n, r.seed, r.error, r.se))
            .map_err(|e| CliError::output(&path, e))?;
    }
    w.flush()?;

    let path = dir.join("mean_errors.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::output(&path, e))?;
    w.write_record(["n", "error", "se_across_seeds", "fitted"])
        .map_err(|e| CliError::output(&path, e))?;
    for m in &report.mean_errors {
        let fitted = report
            .fit
            .map(|f| (f.intercept + f.slope * (m.n as f64).ln()).exp())
            .unwrap_or(f64::NAN);
        w.serialize((m.n, m.error, m.se_across_seeds, fitted))
            .map_err(|e| CliError::output(&path, e))?;
    }
    w.flush()?;
    Ok(())
}

fn sim7(ctx: &Ctx, a: &Sim7Args) -> Result<()> {
    let cfg = study_config(ctx, a)?;
    let report = convergence_study(&cfg)?;
    if let Some(f) = report.fit {
        info!("slope {:.3} (formula exponent {:.3})", f.slope, report.theory_exponent);
    }
    ensure_parent(&a.out)?;
    write_json(&a.out, &report)?;
    let dir = a.out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    write_study_csvs(dir, &report)?;
    let echo = RunEcho::new("sim7", cfg.base_seed, ctx.threads, &[], cfg)?;
    write_json(&sibling(&a.out, "config.json"), &echo)
}

fn fixture(ctx: &Ctx, a: &FixtureArgs) -> Result<()> {
    let map = match &a.map {
        Some(p) => load_map(Some(p))?,
        None => SmoothnessMap::sobolev(a.d, 1),
    };
    let r = lower_bound_fixture(a.d, a.s, &map, a.k, ctx.seed, a.mc)?;
    ensure_parent(&a.out)?;
    write_json(&a.out, &r)?;
    ctx.echo(
        "fixture-lb",
        &a.out,
        &[],
        serde_json::json!({ "d": a.d, "S": a.s, "k": a.k, "mc": a.mc, "map": map }),
    )
}

/// Fits `kind` on coefficient samples and returns it as a boxed map.
fn fit_on_coeffs(
    ctx: &Ctx,
    kind: EstimatorArg,
    x: &Array2<f64>,
    y: &Array2<f64>,
    train: &NnTrainArgs,
    conj: &ConjugateArgs,
) -> Result<Estimator> {
    Ok(match kind {
        EstimatorArg::Linear => Estimator::Linear(linear_ot_baseline(x.view(), y.view())?),
        EstimatorArg::Nnplan => Estimator::NnPlan(NnPlanEstimator::fit(x.clone(), y.clone(), x.ncols())?),
        EstimatorArg::Fourier => {
            let cfg = fourier_config(ctx, None, conj, "fda-fourier");
            Estimator::Fourier(fit(x.view(), y.view(), default_map(), None, &cfg)?)
        }
        EstimatorArg::Nn => {
            let cfg = nn_config(ctx, &default_map(), x.nrows(), x.ncols(), train, conj, "fda-nn")?;
            Estimator::Nn(train_nn(x.view(), y.view(), &cfg)?)
        }
    })
}

#[derive(Serialize)]
struct FdaMetrics {
    estimator: &'static str,
    n_coeffs: usize,
    c1: f64,
    c2: f64,
    avg_dtw_before: f64,
    avg_dtw_after: f64,
    reduction: f64,
}

fn fda(ctx: &Ctx, a: &FdaArgs) -> Result<()> {
    let src = read_functions(&a.source, a.plane.as_deref())?;
    let tgt = read_functions(&a.target, a.plane.as_deref())?;
    if src.grid() != tgt.grid() {
        return Err(CliError::Usage("source and target functions must share a grid".into()));
    }
    let both = FunctionSample::new(
        src.grid().clone(),
        concatenate(Axis(0), &[src.values(), tgt.values()]).expect("equal grid lengths"),
    )?;
    let cfg = calibrate(&both, a.n_coeffs)?;
    let (cx, cy) = (to_coeffs(&src, &cfg)?, to_coeffs(&tgt, &cfg)?);
    let model = fit_on_coeffs(ctx, a.estimator, &cx, &cy, &a.train, &a.conjugate)?;
    let moved = transport_functions(&src, |w| model.transport(w), &cfg)?;
    let before = avg_dtw(src.values(), tgt.values())?;
    let after = avg_dtw(moved.values(), tgt.values())?;
    info!("Avg-DTW {before:.4e} -> {after:.4e}");
    ensure_parent(&a.out)?;
    write_functions(&a.out, &moved)?;
    save_model(&sibling(&a.out, "model.json"), &model)?;
    let metrics = FdaMetrics {
        estimator: model.kind(),
        n_coeffs: a.n_coeffs,
        c1: cfg.c1,
        c2: cfg.c2,
        avg_dtw_before: before,
        avg_dtw_after: after,
        reduction: if before > 0.0 { 1.0 - after / before } else { 0.0 },
    };
    write_json(&sibling(&a.out, "metrics.json"), &metrics)?;
    let mut inputs = vec![a.source.as_path(), a.target.as_path()];
    if let Some(p) = &a.plane {
        inputs.push(p);
    }
    ctx.echo("fda", &a.out, &inputs, serde_json::json!({ "coefficients": cfg, "estimator": model.kind() }))
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let d = model.input_dim();
    let probe = uniform_sample(a.mc, d, named_seed(ctx.seed, "eval"), 3);
    let est = match a.truth {
        TaskArg::Hockey => {
            let h = HockeyStickMap::new(d, a.q)?;
            l2_error_on(|p| model.transport(p), |p| h.eval(p), &probe, a.error_dims)?
        }
        TaskArg::Identity => l2_error_on(|p| model.transport(p), |p| p.to_vec(), &probe, a.error_dims)?,
    };
    let out = serde_json::json!({ "kind": model.kind(), "d": d, "error": est.mean, "se": est.se });
    println!("{}", serde_json::to_string_pretty(&out)?);
    if let Some(p) = &a.out {
        ensure_parent(p)?;
        write_json(p, &out)?;
        ctx.echo("eval", p, &[&a.model], serde_json::json!({ "truth": format!("{:?}", a.truth).to_lowercase(), "q": a.q, "mc": a.mc }))?;
    }
    Ok(())
}
