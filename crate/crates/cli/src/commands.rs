//! Command implementations. Each resolves the experiment config, echoes it
//! into the output directory and writes its artifacts there.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use priorgp::bench::{
    calibration, covariance_diagnostics, metrics_row, run_protocol, write_calibration_csv, write_matrix_csv,
    write_metrics_csv, write_series_csv, write_variance_csv, BenchOptions, Forecaster, PreparedMethod, Protocol,
    CALIBRATION_LEVELS,
};
use priorgp::dataset::{synthesize as draw_ensemble, write_csv};
use priorgp::linalg::two_sided_z;
use priorgp::plot::{fan_svg, heatmap_svg, lines_svg, Fan, Series};
use priorgp::train::{fit_previous, select_order as choose_order, TrainOptions};
use priorgp::{Dataset, Error, GeneratorSpec, IgpmModel, Method, ModelFamily, Result, Trajectory};

use crate::config::{self, ExperimentConfig, ForecastConfig, GridConfig, MethodConfig, Violation};
use crate::{Common, MethodArgs};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "PRIORGP_OUT";

struct Run {
    cfg: ExperimentConfig,
    out: PathBuf,
}

fn describe(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{}: {}", if v.pointer.is_empty() { "/" } else { &v.pointer }, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn setup(
    command: &str,
    common: &Common,
    method: Option<&MethodArgs>,
    overrides: impl FnOnce(&mut ExperimentConfig) -> Result<()>,
) -> Result<Run> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path).map_err(|v| Error::Schema {
            file: path.display().to_string(),
            message: describe(&v),
        })?,
        None => ExperimentConfig::default_for_cli(),
    };
    if let Some(d) = &common.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.flags.threads = Some(t);
    }
    cfg.flags.no_timing |= common.no_timing;
    if let Some(m) = method {
        if let Some(label) = m.method {
            if label != cfg.method.label {
                cfg.method = MethodConfig {
                    label,
                    ..cfg.method.clone()
                };
                if label != Method::IgpmParis {
                    cfg.method.basis = None;
                }
            }
        }
        if let Some(q) = m.order {
            cfg.method.order = q;
        }
        if let Some(e) = m.error_estimator {
            cfg.error_estimator = e;
        }
        if let Some(s) = m.starts {
            cfg.flags.starts = s;
        }
        cfg.flags.quadrature_direct |= m.quadrature_direct;
    }
    overrides(&mut cfg)?;

    let out = match (&common.out, &cfg.output_dir) {
        (Some(o), _) | (None, Some(o)) => o.clone(),
        (None, None) => match std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            Some(root) => PathBuf::from(root).join(command),
            None => PathBuf::from("priorgp-out").join(command),
        },
    };
    cfg.dataset = cfg.dataset.as_deref().map(absolute);
    cfg.model = cfg.model.as_deref().map(absolute);
    cfg.output_dir = Some(absolute(&out));

    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::invalid(format!("invalid configuration: {}", describe(&violations))));
    }
    if let Some(n) = cfg.flags.threads {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&out)?;
    write_json(&out.join("config.json"), &cfg)?;
    Ok(Run { cfg, out })
}

impl ExperimentConfig {
    fn default_for_cli() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn bench_options(cfg: &ExperimentConfig) -> BenchOptions {
    BenchOptions {
        seed: cfg.seed,
        repeats: cfg.flags.repeats,
        no_timing: cfg.flags.no_timing,
        parallel: cfg.flags.threads != Some(1),
    }
}

fn protocol(ds: &Dataset) -> Protocol {
    match ds.split() {
        Some((inference, evaluation)) => Protocol::Split { inference, evaluation },
        None => Protocol::LeaveOneOut,
    }
}

/// Trajectories the model is fixed on: the manifest's inference split, or
/// everything.
fn inference_set(ds: &Dataset) -> Vec<Trajectory> {
    ds.split().map(|(i, _)| i).unwrap_or_else(|| ds.trajectories.clone())
}

fn prepare(cfg: &ExperimentConfig, m: &MethodConfig, ds: Option<&Dataset>) -> Result<PreparedMethod> {
    let paris = ds.and_then(|d| d.manifest.paris.as_ref());
    cfg.method_spec(m, paris).prepare()
}

fn train_options(cfg: &ExperimentConfig) -> TrainOptions {
    TrainOptions {
        extra_starts: cfg.flags.starts - 1,
        seed: cfg.seed,
        parallel: cfg.flags.threads != Some(1),
        ..TrainOptions::default()
    }
}

pub fn ingest(common: &Common) -> Result<()> {
    let run = setup("ingest", common, None, |_| Ok(()))?;
    let ds = config::dataset(&run.cfg)?;
    write_csv(&run.out.join("trajectories.csv"), &ds.trajectories)?;
    write_json(&run.out.join("dataset.json"), &ds.echo)?;
    println!(
        "{} trajectories, {} samples → {}",
        ds.echo.trajectory_count,
        ds.echo.sample_count,
        run.out.display()
    );
    Ok(())
}

pub fn synthesize(common: &Common, generator: Option<PathBuf>) -> Result<()> {
    let run = setup("synthesize", common, None, |cfg| {
        if let Some(path) = &generator {
            let spec: GeneratorSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            cfg.generator = Some(spec);
        }
        if let (Some(g), Some(seed)) = (cfg.generator.as_mut(), common.seed) {
            g.seed = seed;
        }
        Ok(())
    })?;
    let spec = run
        .cfg
        .generator
        .as_ref()
        .ok_or_else(|| Error::invalid("synthesize needs a generator spec (`generator` or --generator)"))?;
    let ts = draw_ensemble(spec)?;
    write_csv(&run.out.join("trajectories.csv"), &ts)?;
    let manifest = serde_json::json!({
        "name": "synthetic",
        "files": ["trajectories.csv"],
    });
    write_json(&run.out.join("manifest.json"), &manifest)?;
    println!("{} trajectories → {}", ts.len(), run.out.display());
    Ok(())
}

pub fn select_order(common: &Common, candidates: Option<Vec<u32>>) -> Result<()> {
    let run = setup("select-order", common, None, |cfg| {
        if let Some(c) = candidates {
            cfg.q_candidates = c;
        }
        Ok(())
    })?;
    let ds = config::dataset(&run.cfg)?;
    let sel = choose_order(&inference_set(&ds), &run.cfg.q_candidates, run.cfg.seed)?;
    write_json(&run.out.join("order_selection.json"), &sel)?;
    let mut w = csv_writer(&run.out.join("order_scores.csv"))?;
    w.write_record(["q", "mean_heldout_mse"])?;
    for (q, s) in &sel.scores {
        w.write_record([q.to_string(), s.to_string()])?;
    }
    w.flush()?;
    println!("selected q = {}", sel.order);
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn fit(common: &Common, method: &MethodArgs) -> Result<()> {
    let run = setup("fit", common, Some(method), |_| Ok(()))?;
    let cfg = &run.cfg;
    let ds = config::dataset(cfg)?;
    let prepared = prepare(cfg, &cfg.method, Some(&ds))?;
    let inference = inference_set(&ds);
    if cfg.method.label.is_igpm() {
        let model = prepared.infer(&inference)?;
        for w in model.warnings() {
            log::warn!("{w}");
        }
        model.save(&run.out.join("model.json"))?;
        println!("IGPM model from {} trajectories → {}", inference.len(), run.out.join("model.json").display());
        return Ok(());
    }
    // GPM-curr re-trains at every step; its fit is the warm start.
    let family = match cfg.method.label {
        Method::GpmPrevZmSe => ModelFamily::ZeroMeanSe,
        _ => ModelFamily::PolyMeanPoly {
            order: cfg.method.order,
        },
    };
    let mut report = fit_previous(family, &inference, None, &train_options(cfg))?;
    if cfg.flags.no_timing {
        report.elapsed_s = 0.0;
    }
    write_json(&run.out.join("report.json"), &report)?;
    println!("summed log marginal likelihood {:.6} → {}", report.value, run.out.join("report.json").display());
    Ok(())
}

pub fn predict(
    common: &Common,
    method: &MethodArgs,
    predictive_noise: Option<bool>,
    observed: Option<usize>,
) -> Result<()> {
    let run = setup("predict", common, Some(method), |cfg| {
        if predictive_noise.is_some() {
            cfg.flags.predictive_noise = predictive_noise;
        }
        Ok(())
    })?;
    let cfg = &run.cfg;
    let ds = config::dataset(cfg)?;
    let prepared = prepare(cfg, &cfg.method, Some(&ds))?;
    let protocol = protocol(&ds);
    let opts = bench_options(cfg);
    let series = run_protocol(&prepared, &ds.trajectories, &protocol, &opts)?;
    write_series_csv(create(&run.out.join("series.csv"))?, &series)?;
    write_metrics_csv(create(&run.out.join("metrics.csv"))?, &[metrics_row(&prepared.label(), &series)])?;

    let noise = cfg.flags.predictive_noise.unwrap_or(false);
    let z = two_sided_z(0.95);
    let evaluated: Vec<(Trajectory, Vec<Trajectory>)> = match &protocol {
        Protocol::Split { inference, evaluation } => {
            evaluation.iter().map(|t| (t.clone(), inference.clone())).collect()
        }
        Protocol::LeaveOneOut => (0..ds.trajectories.len())
            .map(|j| {
                let mut others = ds.trajectories.clone();
                let held = others.remove(j);
                (held, others)
            })
            .collect(),
    };
    let shared = match &protocol {
        Protocol::Split { inference, .. } => Some(prepared.select(inference, cfg.seed)?),
        Protocol::LeaveOneOut => None,
    };
    for (j, (t, previous)) in evaluated.iter().enumerate() {
        let owned;
        let cond = match &shared {
            Some(c) => c.as_ref(),
            None => {
                owned = prepared.select(previous, cfg.seed.wrapping_add(j as u64))?;
                owned.as_ref()
            }
        };
        let n = t.len();
        let k = observed.unwrap_or(n.div_ceil(2)).clamp(1, n);
        let (lo, hi) = (t.xs[0], t.xs[n - 1]);
        let grid: Vec<f64> = (0..100).map(|i| lo + (hi - lo) * i as f64 / 99.0).collect();
        let p = cond
            .predict(&t.xs[..k], &t.ys[..k], &grid)
            .map_err(|e| e.in_trajectory(&t.id))?;
        let half: Vec<f64> = p
            .variance
            .iter()
            .zip(&p.noise_variance)
            .map(|(v, nv)| z * (v + if noise { *nv } else { 0.0 }).max(0.0).sqrt())
            .collect();
        let title = format!("{} — trajectory {} after {k} points", prepared.label(), t.id);
        let svg = fan_svg(&Fan {
            title: &title,
            xlabel: axis_label(&ds.manifest.x_axis.role, "x"),
            ylabel: axis_label(&ds.manifest.y_axis.role, "y"),
            x: &grid,
            mean: &p.mean,
            half_width: &half,
            truth: Some((&t.xs, &t.ys)),
            observed: Some((&t.xs[..k], &t.ys[..k])),
        });
        write_text(&run.out.join("fans").join(format!("{}.svg", file_stem(&t.id))), &svg)?;
    }
    println!("{} prediction series → {}", series.len(), run.out.display());
    Ok(())
}

fn axis_label<'a>(role: &'a str, fallback: &'a str) -> &'a str {
    if role.is_empty() {
        fallback
    } else {
        role
    }
}

pub fn benchmark(common: &Common, method: &MethodArgs, methods: Option<Vec<Method>>) -> Result<()> {
    let run = setup("benchmark", common, Some(method), |cfg| {
        if let Some(labels) = methods {
            let order = cfg.method.order;
            cfg.methods = labels
                .into_iter()
                .map(|label| MethodConfig {
                    order,
                    ..MethodConfig::of(label)
                })
                .collect();
        }
        Ok(())
    })?;
    let cfg = &run.cfg;
    let ds = config::dataset(cfg)?;
    let protocol = protocol(&ds);
    let opts = bench_options(cfg);
    let mut rows = Vec::new();
    for m in cfg.method_list() {
        let prepared = prepare(cfg, &m, Some(&ds))?;
        let label = prepared.label();
        let series = run_protocol(&prepared, &ds.trajectories, &protocol, &opts)?;
        write_series_csv(create(&run.out.join("series").join(format!("{}.csv", file_stem(&label))))?, &series)?;
        let row = metrics_row(&label, &series);
        eprintln!("{label}: RMSE {:.6e}, RMSE-half {:.6e}", row.rmse, row.rmse_half);
        rows.push(row);
    }
    write_metrics_csv(create(&run.out.join("metrics.csv"))?, &rows)?;
    println!("{} methods → {}", rows.len(), run.out.join("metrics.csv").display());
    Ok(())
}

pub fn calibrate(common: &Common, method: &MethodArgs, predictive_noise: Option<bool>) -> Result<()> {
    let run = setup("calibrate", common, Some(method), |cfg| {
        if predictive_noise.is_some() {
            cfg.flags.predictive_noise = predictive_noise;
        }
        Ok(())
    })?;
    let cfg = &run.cfg;
    let ds = config::dataset(cfg)?;
    let prepared = prepare(cfg, &cfg.method, Some(&ds))?;
    let opts = BenchOptions {
        no_timing: true,
        ..bench_options(cfg)
    };
    let series = run_protocol(&prepared, &ds.trajectories, &protocol(&ds), &opts)?;
    let c = calibration(
        &series,
        &CALIBRATION_LEVELS,
        cfg.flags.predictive_noise.unwrap_or(true),
        None,
    )?;
    write_calibration_csv(create(&run.out.join("calibration.csv"))?, &c)?;
    let title = format!("{} — interval coverage over {} predictions", prepared.label(), c.pairs);
    let svg = lines_svg(
        &title,
        "nominal level",
        "empirical frequency",
        &[Series {
            label: "empirical",
            x: &c.levels,
            y: &c.frequencies,
            dashed: false,
        }],
        true,
    );
    write_text(&run.out.join("calibration.svg"), &svg)?;
    for (l, f) in c.levels.iter().zip(&c.frequencies) {
        println!("{:>4.0}%  {f:.4}", l * 100.0);
    }
    Ok(())
}

pub fn variance_forecast(
    common: &Common,
    method: &MethodArgs,
    model: Option<PathBuf>,
    schedule: Option<Vec<f64>>,
    target: Option<f64>,
    steps: Option<Vec<usize>>,
) -> Result<()> {
    let run = setup("variance-forecast", common, Some(method), |cfg| {
        if let Some(m) = model {
            cfg.model = Some(m);
        }
        let mut f = cfg.forecast.take().unwrap_or(ForecastConfig {
            schedule: Vec::new(),
            target: f64::NAN,
            steps: None,
        });
        if let Some(s) = schedule {
            f.schedule = s;
        }
        if let Some(t) = target {
            f.target = t;
        }
        if steps.is_some() {
            f.steps = steps;
        }
        if !f.target.is_finite() {
            return Err(Error::invalid("variance-forecast needs a finite target (`forecast.target` or --target)"));
        }
        cfg.forecast = Some(f);
        Ok(())
    })?;
    let cfg = &run.cfg;
    let f = cfg.forecast.as_ref().expect("set during setup");
    let (gp, label) = match &cfg.model {
        Some(path) => (IgpmModel::load(path)?.gp().clone(), "IGPM".to_string()),
        None => {
            let ds = config::dataset(cfg)?;
            let prepared = prepare(cfg, &cfg.method, Some(&ds))?;
            let cond = prepared.select(&inference_set(&ds), cfg.seed)?;
            let gp = cond.fixed_model().cloned().ok_or_else(|| {
                Error::invalid(format!(
                    "{} re-trains on current data, so its variance cannot be forecast in advance",
                    cfg.method.label
                ))
            })?;
            (gp, prepared.label())
        }
    };
    let steps: Vec<usize> = f.steps.clone().unwrap_or_else(|| (0..=f.schedule.len()).collect());
    let widths = priorgp::bench::variance_forecast(&gp, &f.schedule, f.target, &steps)?;
    write_variance_csv(create(&run.out.join("variance.csv"))?, &widths)?;
    let xs: Vec<f64> = widths.iter().map(|w| w.0 as f64).collect();
    let ys: Vec<f64> = widths.iter().map(|w| w.1).collect();
    let title = format!("{label} — 95% half-width at x = {}", f.target);
    let svg = lines_svg(
        &title,
        "measurements",
        "interval half-width",
        &[Series {
            label: &label,
            x: &xs,
            y: &ys,
            dashed: false,
        }],
        false,
    );
    write_text(&run.out.join("variance.svg"), &svg)?;
    println!("{} steps → {}", widths.len(), run.out.join("variance.csv").display());
    Ok(())
}

pub fn diagnose(common: &Common, method: &MethodArgs, model: Option<PathBuf>, grid_points: Option<usize>) -> Result<()> {
    let run = setup("diagnose", common, Some(method), |cfg| {
        if let Some(m) = model {
            cfg.model = Some(m);
        }
        if let (Some(g), Some(n)) = (cfg.grid.as_mut(), grid_points) {
            g.points = n;
        }
        Ok(())
    })?;
    let cfg = &run.cfg;
    let ds = match &cfg.dataset {
        Some(_) => Some(config::dataset(cfg)?),
        None => None,
    };
    let previous = ds.as_ref().map(inference_set);
    let igpm = match &cfg.model {
        Some(path) => IgpmModel::load(path)?,
        None => {
            let ds = ds
                .as_ref()
                .ok_or_else(|| Error::invalid("diagnose needs a saved model or a dataset"))?;
            if !cfg.method.label.is_igpm() {
                return Err(Error::invalid(format!(
                    "diagnose compares IGPM covariances; {} is not an IGPM method",
                    cfg.method.label
                )));
            }
            prepare(cfg, &cfg.method, Some(ds))?.infer(previous.as_deref().unwrap_or_default())?
        }
    };
    let grid = match (&cfg.grid, &previous) {
        (Some(g), _) => g.values(),
        (None, Some(p)) => {
            let lo = p.iter().map(|t| t.xs[0]).fold(f64::INFINITY, f64::min);
            let hi = p.iter().map(|t| t.xs[t.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
            GridConfig {
                lower: lo,
                upper: hi,
                points: grid_points.unwrap_or(40),
            }
            .values()
        }
        (None, None) => return Err(Error::invalid("diagnose without data needs a `grid` in the config")),
    };
    let d = covariance_diagnostics(&igpm, previous.as_deref(), &grid)?;
    write_matrix_csv(create(&run.out.join("model_covariance.csv"))?, &d.grid, &d.model)?;
    write_text(&run.out.join("model_covariance.svg"), &heatmap_svg("model covariance", &d.model))?;
    if let Some(s) = &d.sample {
        write_matrix_csv(create(&run.out.join("sample_covariance.csv"))?, &d.grid, s)?;
        write_text(&run.out.join("sample_covariance.svg"), &heatmap_svg("sample covariance", s))?;
    }
    let summary = serde_json::json!({
        "grid_points": d.grid.len(),
        "relative_difference": d.relative_difference(),
    });
    write_json(&run.out.join("diagnostics.json"), &summary)?;
    match d.relative_difference() {
        Some(r) => println!("relative Frobenius difference {r:.4}"),
        None => println!("model covariance on {} points", d.grid.len()),
    }
    Ok(())
}

pub fn validate(path: &Path) -> ExitCode {
    let violations = match ExperimentConfig::from_path(path) {
        Ok(cfg) => cfg.violations(),
        Err(v) => v,
    };
    let report = serde_json::json!({
        "config": path.display().to_string(),
        "valid": violations.is_empty(),
        "violations": violations,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
