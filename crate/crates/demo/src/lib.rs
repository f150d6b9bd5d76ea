//! Browser demo. Three operations, each a plain function over serde types
//! with a JSON-in/JSON-out `wasm_bindgen` wrapper:
//!
//! - [`forecast_fan`]: infer a model from a synthetic ensemble and predict a
//!   new trajectory from its first few points;
//! - [`interval_forecast`]: 95% half-widths at a target for a measurement
//!   plan, before any value is known;
//! - [`paris_curves`]: crack-growth life curves for several exponents.

use std::sync::Arc;

use priorgp::basis::{paris_cycles, BasisDescriptor};
use priorgp::bench::variance_forecast;
use priorgp::dataset::{synthesize, Sampling};
use priorgp::igpm::{infer_model, InferOptions};
use priorgp::linalg::two_sided_z;
use priorgp::{BasisSet, Error, ErrorEstimator, GeneratorSpec, IgpmModel, ParisLawConfig, Result, Trajectory};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// A quadratic degradation ensemble: `y = β₀ + β₁x + β₂x²` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ensemble {
    pub trajectories: usize,
    pub points: usize,
    /// Spread of the coefficients around their mean, as a multiple of a
    /// fixed base covariance.
    pub spread: f64,
    pub noise_sd: f64,
    pub estimator: ErrorEstimator,
    pub seed: u64,
}

impl Default for Ensemble {
    fn default() -> Self {
        Ensemble {
            trajectories: 20,
            points: 15,
            spread: 1.0,
            noise_sd: 0.05,
            estimator: ErrorEstimator::Rms,
            seed: 1,
        }
    }
}

impl Ensemble {
    fn grid(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    /// `count` trajectories; the first `trajectories` are previous data.
    fn draw(&self, count: usize) -> Result<Vec<Trajectory>> {
        let s = self.spread.max(0.0);
        synthesize(&GeneratorSpec {
            basis: BasisDescriptor::Polynomial { order: 2 },
            coef_mean: vec![1.0, 0.5, 1.5],
            coef_cov: vec![
                vec![0.04 * s, 0.0, 0.0],
                vec![0.0, 0.09 * s, -0.03 * s],
                vec![0.0, -0.03 * s, 0.16 * s],
            ],
            noise_sd: self.noise_sd,
            sampling: Sampling::Grid { xs: self.grid() },
            count,
            seed: self.seed,
        })
    }

    fn infer(&self, previous: &[Trajectory]) -> Result<IgpmModel> {
        infer_model(
            previous,
            Arc::new(BasisSet::polynomial(2)?),
            self.estimator,
            InferOptions::default(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FanRequest {
    pub ensemble: Ensemble,
    /// Points of the new trajectory conditioned on.
    pub observed: usize,
}

impl Default for FanRequest {
    fn default() -> Self {
        FanRequest {
            ensemble: Ensemble::default(),
            observed: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fan {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    /// 95% half-widths including observation noise.
    pub half_width: Vec<f64>,
    /// Previous trajectories (for context).
    pub previous: Vec<Trajectory>,
    /// The new trajectory; its first `observed` points are conditioned on.
    pub truth: Trajectory,
    pub observed: usize,
    pub warnings: Vec<String>,
}

pub fn forecast_fan(req: &FanRequest) -> Result<Fan> {
    let e = &req.ensemble;
    let mut all = e.draw(e.trajectories + 1)?;
    let truth = all.pop().expect("count ≥ 1");
    let model = e.infer(&all)?;
    let k = req.observed.min(truth.len());
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let p = model.gp().posterior(&truth.xs[..k], &truth.ys[..k], &grid)?;
    let z = two_sided_z(0.95);
    let half_width = p
        .variance
        .iter()
        .zip(&p.noise_variance)
        .map(|(v, n)| z * (v + n).max(0.0).sqrt())
        .collect();
    Ok(Fan {
        grid,
        mean: p.mean,
        half_width,
        previous: all,
        truth,
        observed: k,
        warnings: model.warnings().to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntervalRequest {
    pub ensemble: Ensemble,
    /// Measurements planned, evenly spaced from 0 up to `horizon`.
    pub planned: usize,
    pub horizon: f64,
    pub target: f64,
}

impl Default for IntervalRequest {
    fn default() -> Self {
        IntervalRequest {
            ensemble: Ensemble::default(),
            planned: 10,
            horizon: 0.6,
            target: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalForecast {
    pub schedule: Vec<f64>,
    pub steps: Vec<usize>,
    pub half_width: Vec<f64>,
}

pub fn interval_forecast(req: &IntervalRequest) -> Result<IntervalForecast> {
    let previous = req.ensemble.draw(req.ensemble.trajectories)?;
    let model = req.ensemble.infer(&previous)?;
    let n = req.planned;
    let schedule: Vec<f64> = (0..n)
        .map(|i| if n == 1 { 0.0 } else { req.horizon * i as f64 / (n - 1) as f64 })
        .collect();
    let steps: Vec<usize> = (0..=n).collect();
    let widths = variance_forecast(model.gp(), &schedule, req.target, &steps)?;
    Ok(IntervalForecast {
        schedule,
        steps,
        half_width: widths.into_iter().map(|w| w.1).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParisRequest {
    pub alphas: Vec<f64>,
    /// Largest crack length drawn, mm.
    pub final_crack: f64,
    pub points: usize,
}

impl Default for ParisRequest {
    fn default() -> Self {
        ParisRequest {
            alphas: vec![2.6, 2.8, 3.0, 3.2],
            final_crack: 49.8,
            points: 80,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParisCurve {
    pub alpha: f64,
    /// Cycles to grow from the initial crack to each length.
    pub cycles: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParisCurves {
    pub crack: Vec<f64>,
    pub curves: Vec<ParisCurve>,
}

/// Life curves of the Virkler specimen geometry.
pub fn paris_curves(req: &ParisRequest) -> Result<ParisCurves> {
    if req.alphas.is_empty() {
        return Err(Error::invalid("at least one exponent is required"));
    }
    let cfg = ParisLawConfig::virkler().with_alphas(req.alphas.clone());
    cfg.validate()?;
    let (lo, hi) = cfg.domain();
    let top = req.final_crack.clamp(lo, hi - 1e-6 * (hi - lo));
    let n = req.points.max(2);
    let crack: Vec<f64> = (0..n).map(|i| lo + (top - lo) * i as f64 / (n - 1) as f64).collect();
    let curves = req
        .alphas
        .iter()
        .map(|&alpha| {
            let cycles = crack.iter().map(|&a| paris_cycles(a, alpha, &cfg)).collect::<Result<_>>()?;
            Ok(ParisCurve { alpha, cycles })
        })
        .collect::<Result<_>>()?;
    Ok(ParisCurves { crack, curves })
}

fn run<Req, Resp>(json: &str, f: impl FnOnce(&Req) -> Result<Resp>) -> std::result::Result<String, JsError>
where
    Req: for<'de> Deserialize<'de>,
    Resp: Serialize,
{
    let req: Req = serde_json::from_str(json).map_err(|e| JsError::new(&e.to_string()))?;
    let resp = f(&req).map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&resp).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = forecastFan)]
pub fn forecast_fan_js(request: &str) -> std::result::Result<String, JsError> {
    run(request, forecast_fan)
}

#[wasm_bindgen(js_name = intervalForecast)]
pub fn interval_forecast_js(request: &str) -> std::result::Result<String, JsError> {
    run(request, interval_forecast)
}

#[wasm_bindgen(js_name = parisCurves)]
pub fn paris_curves_js(request: &str) -> std::result::Result<String, JsError> {
    run(request, paris_curves)
}
