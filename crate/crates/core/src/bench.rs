//! Evaluation protocol: sequential last-point prediction series, leave-one-out
//! (or fixed-split) studies, error metrics, credible-interval calibration,
//! prior variance forecasts and covariance diagnostics.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, ParisLawConfig};
use crate::clock::Stopwatch;
use crate::dataset::Trajectory;
use crate::exec::par_map;
use crate::gp::{GpModel, Hyperparameters, PosteriorPrediction};
use crate::igpm::{infer_model, reconstruction_covariance, ErrorEstimator, IgpmModel, InferOptions};
use crate::linalg::two_sided_z;
use crate::train::{fit_current, fit_previous, ModelFamily, TrainOptions};
use crate::{Error, Result};

/// Nominal levels of the calibration study.
pub const CALIBRATION_LEVELS: [f64; 4] = [0.50, 0.90, 0.95, 0.99];
/// Truths smaller than this in magnitude are excluded from MAPE.
pub const MAPE_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Zero mean, polynomial kernel, re-trained on the current prefix at
    /// every step.
    #[serde(rename = "GPM-curr")]
    GpmCurr,
    /// Zero mean, squared-exponential kernel, trained on previous data.
    #[serde(rename = "GPM-prev-ZM-SE")]
    GpmPrevZmSe,
    /// Polynomial mean and kernel, trained on previous data.
    #[serde(rename = "GPM-prev-POLY")]
    GpmPrevPoly,
    /// Inferred from polynomial-basis coefficient statistics.
    #[serde(rename = "IGPM-poly")]
    IgpmPoly,
    /// Inferred from Paris-law basis coefficient statistics.
    #[serde(rename = "IGPM-paris")]
    IgpmParis,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::GpmCurr,
        Method::GpmPrevZmSe,
        Method::GpmPrevPoly,
        Method::IgpmPoly,
        Method::IgpmParis,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::GpmCurr => "GPM-curr",
            Method::GpmPrevZmSe => "GPM-prev-ZM-SE",
            Method::GpmPrevPoly => "GPM-prev-POLY",
            Method::IgpmPoly => "IGPM-poly",
            Method::IgpmParis => "IGPM-paris",
        }
    }

    pub fn is_igpm(&self) -> bool {
        matches!(self, Method::IgpmPoly | Method::IgpmParis)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let labels: Vec<&str> = Method::ALL.iter().map(Method::label).collect();
                Error::invalid(format!("unknown method `{s}`; expected one of {}", labels.join(", ")))
            })
    }
}

fn default_order() -> u32 {
    2
}

fn default_starts() -> usize {
    8
}

/// A method plus everything needed to instantiate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    /// Row label; defaults to the method label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Polynomial order `q` (kernels, means and the polynomial basis).
    #[serde(default = "default_order")]
    pub order: u32,
    /// Required by `IGPM-paris`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paris: Option<ParisLawConfig>,
    #[serde(default)]
    pub error_estimator: ErrorEstimator,
    /// Total optimizer starts for trained methods.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// `GPM-curr` only: start from the family default instead of the
    /// parameters trained on previous data.
    #[serde(default)]
    pub cold_start: bool,
    /// Evaluate Paris basis functions by direct quadrature.
    #[serde(default)]
    pub quadrature_direct: bool,
}

impl MethodSpec {
    pub fn new(method: Method, order: u32) -> Self {
        MethodSpec {
            method,
            label: None,
            order,
            paris: None,
            error_estimator: ErrorEstimator::Rms,
            starts: default_starts(),
            cold_start: false,
            quadrature_direct: false,
        }
    }

    pub fn paris(config: ParisLawConfig) -> Self {
        MethodSpec {
            paris: Some(config),
            ..MethodSpec::new(Method::IgpmParis, default_order())
        }
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.label().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::IgpmParis {
            match &self.paris {
                Some(c) => c.validate()?,
                None => return Err(Error::invalid("IGPM-paris needs a Paris-law configuration")),
            }
        }
        if self.starts == 0 {
            return Err(Error::invalid("at least one optimizer start is required"));
        }
        if matches!(self.method, Method::GpmCurr | Method::GpmPrevPoly) && self.order == 0 {
            return Err(Error::invalid("polynomial kernels need order q ≥ 1"));
        }
        Ok(())
    }

    /// Builds reusable state (e.g. the tabulated Paris basis).
    pub fn prepare(&self) -> Result<PreparedMethod> {
        self.validate()?;
        let basis = match self.method {
            Method::IgpmPoly => Some(Arc::new(BasisSet::polynomial(self.order)?)),
            Method::IgpmParis => Some(Arc::new(BasisSet::paris_with(
                self.paris.clone().expect("validated"),
                self.quadrature_direct,
            )?)),
            _ => None,
        };
        Ok(PreparedMethod {
            spec: self.clone(),
            basis,
        })
    }
}

/// Conditions a fixed (or per-step re-trained) model on a current prefix.
pub trait Conditioner: Send + Sync {
    fn predict(&self, xs: &[f64], ys: &[f64], query: &[f64]) -> Result<PosteriorPrediction>;

    /// The model, when its parameters do not depend on current data.
    fn fixed_model(&self) -> Option<&GpModel> {
        None
    }
}

/// Produces a conditioner from previous trajectories.
pub trait Forecaster: Sync {
    fn label(&self) -> String;
    fn select(&self, previous: &[Trajectory], seed: u64) -> Result<Box<dyn Conditioner>>;
}

struct FixedModel(GpModel);

impl Conditioner for FixedModel {
    fn predict(&self, xs: &[f64], ys: &[f64], query: &[f64]) -> Result<PosteriorPrediction> {
        self.0.posterior(xs, ys, query)
    }

    fn fixed_model(&self) -> Option<&GpModel> {
        Some(&self.0)
    }
}

struct RetrainEachStep {
    order: u32,
    start: Hyperparameters,
    opts: TrainOptions,
}

impl Conditioner for RetrainEachStep {
    fn predict(&self, xs: &[f64], ys: &[f64], query: &[f64]) -> Result<PosteriorPrediction> {
        let family = ModelFamily::ZeroMeanPoly { order: self.order };
        if xs.is_empty() {
            let s = self.opts.standardizer.unwrap_or_default();
            return family.build(&family.from_raw(&self.start, &s), s)?.posterior(&[], &[], query);
        }
        let opts = TrainOptions {
            seed: self.opts.seed.wrapping_add(xs.len() as u64),
            ..self.opts.clone()
        };
        let report = fit_current(family, xs, ys, &self.start, &opts)?;
        report.model()?.posterior(xs, ys, query)
    }
}

#[derive(Clone, Debug)]
pub struct PreparedMethod {
    spec: MethodSpec,
    basis: Option<Arc<BasisSet>>,
}

impl PreparedMethod {
    pub fn spec(&self) -> &MethodSpec {
        &self.spec
    }

    /// Inferred model for IGPM methods.
    pub fn infer(&self, previous: &[Trajectory]) -> Result<IgpmModel> {
        let basis = self
            .basis
            .clone()
            .ok_or_else(|| Error::invalid(format!("{} is not an IGPM method", self.spec.method)))?;
        infer_model(previous, basis, self.spec.error_estimator, InferOptions::default())
    }

    fn train_opts(&self, seed: u64) -> TrainOptions {
        TrainOptions {
            extra_starts: self.spec.starts - 1,
            seed,
            parallel: false,
            ..TrainOptions::default()
        }
    }
}

impl Forecaster for PreparedMethod {
    fn label(&self) -> String {
        self.spec.display_label()
    }

    fn select(&self, previous: &[Trajectory], seed: u64) -> Result<Box<dyn Conditioner>> {
        let q = self.spec.order;
        match self.spec.method {
            Method::IgpmPoly | Method::IgpmParis => Ok(Box::new(FixedModel(self.infer(previous)?.gp().clone()))),
            Method::GpmPrevZmSe => {
                let r = fit_previous(ModelFamily::ZeroMeanSe, previous, None, &self.train_opts(seed))?;
                Ok(Box::new(FixedModel(r.model()?)))
            }
            Method::GpmPrevPoly => {
                let r = fit_previous(ModelFamily::PolyMeanPoly { order: q }, previous, None, &self.train_opts(seed))?;
                Ok(Box::new(FixedModel(r.model()?)))
            }
            Method::GpmCurr => {
                let family = ModelFamily::ZeroMeanPoly { order: q };
                let (start, standardizer) = if self.spec.cold_start {
                    (family.default_start(), None)
                } else {
                    let r = fit_previous(ModelFamily::PolyMeanPoly { order: q }, previous, None, &self.train_opts(seed))?;
                    let mut start = r.best.clone();
                    start.mean_coeffs.clear();
                    (start, Some(r.standardizer))
                };
                Ok(Box::new(RetrainEachStep {
                    order: q,
                    start,
                    opts: TrainOptions {
                        standardizer,
                        ..self.train_opts(seed)
                    },
                }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Number of observed points conditioned on.
    pub observed: usize,
    pub mean: f64,
    /// Latent variance at the target.
    pub variance: f64,
    pub noise_variance: f64,
    pub time_s: f64,
}

/// Predictions of one trajectory's final value as its prefix grows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSeries {
    pub id: String,
    pub n_points: usize,
    pub target_x: f64,
    pub truth: f64,
    pub records: Vec<StepRecord>,
    pub select_time_s: f64,
}

impl PredictionSeries {
    pub fn total_time_s(&self) -> f64 {
        self.records.iter().map(|r| r.time_s).sum()
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Conditions on `xs[..i]`, `ys[..i]` for `i = 1..xs.len()` and predicts at
/// `target_x`. Each step is timed as the median over `repeats` runs.
pub fn predict_prefixes(
    conditioner: &dyn Conditioner,
    xs: &[f64],
    ys: &[f64],
    target_x: f64,
    repeats: usize,
) -> Result<Vec<StepRecord>> {
    let repeats = repeats.max(1);
    let mut out = Vec::with_capacity(xs.len());
    for i in 1..=xs.len() {
        let mut times = Vec::with_capacity(repeats);
        let mut pred = None;
        for _ in 0..repeats {
            let clock = Stopwatch::start();
            let p = conditioner
                .predict(&xs[..i], &ys[..i], &[target_x])
                .map_err(|e| e.at_step(i))?;
            times.push(clock.elapsed().as_secs_f64());
            pred.get_or_insert(p);
        }
        let p = pred.expect("at least one repeat");
        out.push(StepRecord {
            observed: i,
            mean: p.mean[0],
            variance: p.variance[0],
            noise_variance: p.noise_variance[0],
            time_s: median(&mut times),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct BenchOptions {
    pub seed: u64,
    /// Timing repeats per step (median is reported).
    pub repeats: usize,
    /// Record zero times so outputs are byte-reproducible.
    pub no_timing: bool,
    /// Run held-out trajectories concurrently; only honoured without timing.
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            seed: 0,
            repeats: 3,
            no_timing: false,
            parallel: false,
        }
    }
}

fn series_for(
    forecaster: &dyn Forecaster,
    held_out: &Trajectory,
    previous: &[Trajectory],
    seed: u64,
    opts: &BenchOptions,
    conditioner: Option<(&dyn Conditioner, f64)>,
) -> Result<PredictionSeries> {
    let n = held_out.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "trajectory {} needs at least two points for a prediction series",
            held_out.id
        )));
    }
    let owned;
    let (cond, select_time) = match conditioner {
        Some(c) => c,
        None => {
            let clock = Stopwatch::start();
            owned = forecaster.select(previous, seed)?;
            (owned.as_ref(), clock.elapsed().as_secs_f64())
        }
    };
    let (target_x, truth) = held_out.last();
    let repeats = if opts.no_timing { 1 } else { opts.repeats };
    let mut records = predict_prefixes(cond, &held_out.xs[..n - 1], &held_out.ys[..n - 1], target_x, repeats)?;
    let mut select_time_s = select_time;
    if opts.no_timing {
        records.iter_mut().for_each(|r| r.time_s = 0.0);
        select_time_s = 0.0;
    }
    Ok(PredictionSeries {
        id: held_out.id.clone(),
        n_points: n,
        target_x,
        truth,
        records,
        select_time_s,
    })
}

/// Fixes the method on `previous`, then predicts the final point of
/// `held_out` from each of its proper prefixes.
pub fn sequential_predict(
    forecaster: &dyn Forecaster,
    held_out: &Trajectory,
    previous: &[Trajectory],
    opts: &BenchOptions,
) -> Result<PredictionSeries> {
    series_for(forecaster, held_out, previous, opts.seed, opts, None).map_err(|e| e.in_trajectory(&held_out.id))
}

/// How trajectories are divided between model selection and evaluation.
#[derive(Clone, Debug)]
pub enum Protocol {
    /// Each trajectory is predicted from all the others.
    LeaveOneOut,
    /// One model fixed on `inference`, evaluated on `evaluation`.
    Split {
        inference: Vec<Trajectory>,
        evaluation: Vec<Trajectory>,
    },
}

/// Runs the protocol and returns one series per evaluated trajectory.
pub fn run_protocol(
    forecaster: &dyn Forecaster,
    trajectories: &[Trajectory],
    protocol: &Protocol,
    opts: &BenchOptions,
) -> Result<Vec<PredictionSeries>> {
    match protocol {
        Protocol::LeaveOneOut => {
            if trajectories.len() < 3 {
                return Err(Error::InsufficientTrajectories {
                    required: 3,
                    got: trajectories.len(),
                });
            }
            let idx: Vec<usize> = (0..trajectories.len()).collect();
            let one = |&j: &usize| {
                let previous: Vec<Trajectory> = trajectories
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, t)| t.clone())
                    .collect();
                let seed = opts.seed.wrapping_add(j as u64);
                series_for(forecaster, &trajectories[j], &previous, seed, opts, None)
                    .map_err(|e| e.in_trajectory(&trajectories[j].id))
            };
            let results = if opts.parallel && opts.no_timing {
                par_map(&idx, one)
            } else {
                idx.iter().map(one).collect()
            };
            results.into_iter().collect()
        }
        Protocol::Split {
            inference,
            evaluation,
        } => {
            let clock = Stopwatch::start();
            let cond = forecaster.select(inference, opts.seed)?;
            let select_time = if opts.no_timing { 0.0 } else { clock.elapsed().as_secs_f64() };
            let one = |t: &Trajectory| {
                series_for(forecaster, t, inference, opts.seed, opts, Some((cond.as_ref(), select_time)))
                    .map_err(|e| e.in_trajectory(&t.id))
            };
            let results: Vec<Result<PredictionSeries>> = if opts.parallel && opts.no_timing {
                par_map(evaluation, one)
            } else {
                evaluation.iter().map(one).collect()
            };
            results.into_iter().collect()
        }
    }
}

/// Leave-one-out study of one method.
pub fn leave_one_out(
    forecaster: &dyn Forecaster,
    trajectories: &[Trajectory],
    opts: &BenchOptions,
) -> Result<(MetricsRow, Vec<PredictionSeries>)> {
    let series = run_protocol(forecaster, trajectories, &Protocol::LeaveOneOut, opts)?;
    Ok((metrics_row(&forecaster.label(), &series), series))
}

/// One row of the method comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub rmse: f64,
    pub mape: f64,
    pub rmse_half: f64,
    pub mape_half: f64,
    /// Mean total time of a prediction series.
    pub pred_time_s: f64,
    /// Mean model-selection (training / inference) time.
    pub select_time_s: f64,
    /// Mean time of a single prediction step.
    pub pred_time_per_step_s: f64,
    pub trajectories: usize,
    /// Trajectories left out of MAPE because their final value is ~0.
    pub mape_skipped: usize,
}

struct TrajectoryErrors {
    rmse: f64,
    rmse_half: f64,
    ape: Option<(f64, f64)>,
}

fn trajectory_errors(s: &PredictionSeries) -> Option<TrajectoryErrors> {
    if s.records.is_empty() {
        return None;
    }
    let half_start = s.n_points.div_ceil(2);
    let rms = |recs: &mut dyn Iterator<Item = &StepRecord>| {
        let (sum, k) = recs.fold((0.0, 0usize), |(a, k), r| (a + (r.mean - s.truth).powi(2), k + 1));
        if k == 0 {
            f64::NAN
        } else {
            (sum / k as f64).sqrt()
        }
    };
    let mape = |recs: &mut dyn Iterator<Item = &StepRecord>| {
        let (sum, k) = recs.fold((0.0, 0usize), |(a, k), r| (a + ((r.mean - s.truth) / s.truth).abs(), k + 1));
        if k == 0 {
            f64::NAN
        } else {
            sum / k as f64
        }
    };
    let ape = (s.truth.abs() >= MAPE_GUARD).then(|| {
        (
            mape(&mut s.records.iter()),
            mape(&mut s.records.iter().filter(|r| r.observed >= half_start)),
        )
    });
    Some(TrajectoryErrors {
        rmse: rms(&mut s.records.iter()),
        rmse_half: rms(&mut s.records.iter().filter(|r| r.observed >= half_start)),
        ape,
    })
}

/// Averages per-trajectory last-point errors and timings.
pub fn metrics_row(label: &str, series: &[PredictionSeries]) -> MetricsRow {
    let errs: Vec<TrajectoryErrors> = series.iter().filter_map(trajectory_errors).collect();
    let mean = |v: &mut dyn Iterator<Item = f64>| {
        let (s, k) = v.filter(|x| !x.is_nan()).fold((0.0, 0usize), |(a, k), x| (a + x, k + 1));
        if k == 0 {
            f64::NAN
        } else {
            s / k as f64
        }
    };
    let n_series = series.len().max(1) as f64;
    let steps: usize = series.iter().map(|s| s.records.len()).sum();
    let total_time: f64 = series.iter().map(PredictionSeries::total_time_s).sum();
    MetricsRow {
        model: label.to_string(),
        rmse: mean(&mut errs.iter().map(|e| e.rmse)),
        mape: mean(&mut errs.iter().filter_map(|e| e.ape.map(|a| a.0))),
        rmse_half: mean(&mut errs.iter().map(|e| e.rmse_half)),
        mape_half: mean(&mut errs.iter().filter_map(|e| e.ape.map(|a| a.1))),
        pred_time_s: total_time / n_series,
        select_time_s: series.iter().map(|s| s.select_time_s).sum::<f64>() / n_series,
        pred_time_per_step_s: if steps == 0 { 0.0 } else { total_time / steps as f64 },
        trajectories: series.len(),
        mape_skipped: errs.iter().filter(|e| e.ape.is_none()).count(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub levels: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// Number of (trajectory, step) pairs evaluated.
    pub pairs: usize,
}

/// Fraction of (trajectory, step) pairs whose true final value lies inside
/// the symmetric credible interval at each level. `steps` optionally keeps
/// only records with that many observed points.
pub fn calibration(
    series: &[PredictionSeries],
    levels: &[f64],
    predictive_noise: bool,
    steps: Option<std::ops::RangeInclusive<usize>>,
) -> Result<CalibrationResult> {
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::invalid(format!("calibration level {l} is not in (0, 1)")));
    }
    let z: Vec<f64> = levels.iter().map(|&l| two_sided_z(l)).collect();
    let mut hits = vec![0usize; levels.len()];
    let mut pairs = 0;
    for s in series {
        for r in &s.records {
            if let Some(range) = &steps {
                if !range.contains(&r.observed) {
                    continue;
                }
            }
            pairs += 1;
            let var = if predictive_noise { r.variance + r.noise_variance } else { r.variance };
            let sd = var.max(0.0).sqrt();
            let err = (s.truth - r.mean).abs();
            for (h, zl) in hits.iter_mut().zip(&z) {
                if err <= zl * sd {
                    *h += 1;
                }
            }
        }
    }
    let frequencies = hits
        .iter()
        .map(|&h| if pairs == 0 { 0.0 } else { h as f64 / pairs as f64 })
        .collect();
    Ok(CalibrationResult {
        levels: levels.to_vec(),
        frequencies,
        pairs,
    })
}

/// Half-widths of the 95% credible interval at `target` after conditioning
/// on the first `s` schedule locations, for each `s` in `steps`. Values
/// are never needed: the posterior variance does not depend on them.
pub fn variance_forecast(model: &GpModel, schedule: &[f64], target: f64, steps: &[usize]) -> Result<Vec<(usize, f64)>> {
    let z = two_sided_z(0.95);
    steps
        .iter()
        .map(|&s| {
            if s > schedule.len() {
                return Err(Error::invalid(format!(
                    "step {s} exceeds the schedule length {}",
                    schedule.len()
                )));
            }
            let v = model.posterior_variance(&schedule[..s], &[target])?[0];
            Ok((s, z * v.max(0.0).sqrt()))
        })
        .collect()
}

/// Model covariance on a grid and, optionally, the sample covariance of
/// basis-fit reconstructions of a set of trajectories.
#[derive(Clone, Debug)]
pub struct CovarianceDiagnostics {
    pub grid: Vec<f64>,
    pub model: DMatrix<f64>,
    pub sample: Option<DMatrix<f64>>,
}

impl CovarianceDiagnostics {
    /// `‖model − sample‖_F / ‖sample‖_F`.
    pub fn relative_difference(&self) -> Option<f64> {
        self.sample.as_ref().map(|s| (&self.model - s).norm() / s.norm())
    }
}

pub fn covariance_diagnostics(
    model: &IgpmModel,
    previous: Option<&[Trajectory]>,
    grid: &[f64],
) -> Result<CovarianceDiagnostics> {
    let model_cov = model.gp().prior_covariance(grid, grid)?;
    let sample = match previous {
        Some(p) => Some(reconstruction_covariance(model, p, grid)?),
        None => None,
    };
    Ok(CovarianceDiagnostics {
        grid: grid.to_vec(),
        model: model_cov,
        sample,
    })
}

/// `model,rmse,mape,rmse_half,mape_half,pred_time_s,select_time_s`
pub fn write_metrics_csv<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["model", "rmse", "mape", "rmse_half", "mape_half", "pred_time_s", "select_time_s"])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.rmse.to_string(),
            r.mape.to_string(),
            r.rmse_half.to_string(),
            r.mape_half.to_string(),
            r.pred_time_s.to_string(),
            r.select_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `level,empirical_frequency`
pub fn write_calibration_csv<W: Write>(w: W, c: &CalibrationResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["level", "empirical_frequency"])?;
    for (l, f) in c.levels.iter().zip(&c.frequencies) {
        w.write_record([l.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `step,ci_halfwidth`
pub fn write_variance_csv<W: Write>(w: W, widths: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["step", "ci_halfwidth"])?;
    for (s, h) in widths {
        w.write_record([s.to_string(), h.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step predictions: `trajectory_id,observed,target_x,truth,mean,variance,noise_variance,time_s`.
pub fn write_series_csv<W: Write>(w: W, series: &[PredictionSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "trajectory_id",
        "observed",
        "target_x",
        "truth",
        "mean",
        "variance",
        "noise_variance",
        "time_s",
    ])?;
    for s in series {
        for r in &s.records {
            w.write_record([
                s.id.clone(),
                r.observed.to_string(),
                s.target_x.to_string(),
                s.truth.to_string(),
                r.mean.to_string(),
                r.variance.to_string(),
                r.noise_variance.to_string(),
                r.time_s.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Header row of grid locations, then one row per grid location.
pub fn write_matrix_csv<W: Write>(w: W, grid: &[f64], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut head = vec!["x".to_string()];
    head.extend(grid.iter().map(|g| g.to_string()));
    w.write_record(&head)?;
    for (i, g) in grid.iter().enumerate() {
        let mut row = vec![g.to_string()];
        row.extend((0..m.ncols()).map(|j| m[(i, j)].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(truth: f64, means: &[f64]) -> PredictionSeries {
        PredictionSeries {
            id: "t".into(),
            n_points: means.len() + 1,
            target_x: 1.0,
            truth,
            records: means
                .iter()
                .enumerate()
                .map(|(i, &m)| StepRecord {
                    observed: i + 1,
                    mean: m,
                    variance: 0.0,
                    noise_variance: 0.0,
                    time_s: 0.0,
                })
                .collect(),
            select_time_s: 0.0,
        }
    }

    #[test]
    fn labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
            let j = serde_json::to_string(&m).unwrap();
            assert_eq!(j, format!("\"{}\"", m.label()));
        }
        let err = "GPM-bogus".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("IGPM-paris") && err.contains("GPM-curr"));
    }

    #[test]
    fn hand_computed_metrics() {
        // n = 5: steps 1..4, half from step 3
        let s = series(10.0, &[12.0, 8.0, 11.0, 10.0]);
        let row = metrics_row("x", &[s]);
        let rmse = ((4.0 + 4.0 + 1.0 + 0.0) / 4.0f64).sqrt();
        assert!((row.rmse - rmse).abs() < 1e-15);
        assert!((row.rmse_half - (0.5f64).sqrt()).abs() < 1e-15);
        assert!((row.mape - (0.2 + 0.2 + 0.1 + 0.0) / 4.0).abs() < 1e-15);
        assert!((row.mape_half - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_truth_is_skipped_in_mape() {
        let row = metrics_row("x", &[series(0.0, &[1.0, 2.0]), series(2.0, &[1.0, 3.0])]);
        assert_eq!(row.mape_skipped, 1);
        assert!((row.mape - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_intervals() {
        let exact = series(1.0, &[1.0, 1.0]);
        let c = calibration(&[exact], &CALIBRATION_LEVELS, true, None).unwrap();
        assert!(c.frequencies.iter().all(|&f| f == 1.0));
        let wrong = series(1.0, &[2.0, 0.5]);
        let c = calibration(&[wrong], &CALIBRATION_LEVELS, true, None).unwrap();
        assert!(c.frequencies.iter().all(|&f| f == 0.0));
        assert_eq!(c.pairs, 2);
    }

    #[test]
    fn step_filter_restricts_pairs() {
        let s = series(1.0, &[1.0, 5.0, 1.0]);
        let c = calibration(&[s], &[0.5], false, Some(2..=2)).unwrap();
        assert_eq!(c.pairs, 1);
        assert_eq!(c.frequencies, vec![0.0]);
    }

    #[test]
    fn paris_method_requires_config() {
        let spec = MethodSpec::new(Method::IgpmParis, 2);
        assert!(spec.prepare().is_err());
        assert!(MethodSpec::paris(ParisLawConfig::virkler()).prepare().is_ok());
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "model,rmse,mape,rmse_half,mape_half,pred_time_s,select_time_s\n");
        let mut buf = Vec::new();
        write_variance_csv(&mut buf, &[(0, 1.5)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,ci_halfwidth\n0,1.5\n");
    }
}
