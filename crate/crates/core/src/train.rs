//! Hyperparameter training for predefined GP families: on the current
//! trajectory alone, or on the summed log marginal likelihood of previous
//! trajectories. Also polynomial order selection by a 70/30 split.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::clock::Stopwatch;
use crate::dataset::Trajectory;
use crate::exec::par_map;
use crate::gp::{Covariance, GpModel, Hyperparameters, MeanFunction, NoiseModel};
use crate::linalg::lstsq_min_norm;
use crate::optim::{nelder_mead_max, SimplexConfig};
use crate::standardize::{StandardizePolicy, Standardizer};
use crate::{Error, Result};

/// Log-parameters are clamped to this range so the optimizer cannot drive
/// a scale to zero or infinity.
const LOG_BOUND: f64 = 50.0;
/// Extra starts are drawn as `log θ + U(ln 1e-2, ln 1e2)`.
const START_SPREAD: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelFamily {
    /// Zero mean, squared-exponential covariance.
    ZeroMeanSe,
    /// Zero mean, polynomial covariance of the given order.
    ZeroMeanPoly { order: u32 },
    /// Polynomial mean and polynomial covariance of the same order.
    PolyMeanPoly { order: u32 },
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelFamily::ZeroMeanSe => write!(f, "zero mean, SE covariance"),
            ModelFamily::ZeroMeanPoly { order } => write!(f, "zero mean, polynomial covariance (q={order})"),
            ModelFamily::PolyMeanPoly { order } => {
                write!(f, "polynomial mean and covariance (q={order})")
            }
        }
    }
}

impl ModelFamily {
    fn mean_len(&self) -> usize {
        match self {
            ModelFamily::PolyMeanPoly { order } => *order as usize + 1,
            _ => 0,
        }
    }

    /// Number of free parameters: three kernel/noise scales plus mean
    /// coefficients.
    pub fn param_count(&self) -> usize {
        3 + self.mean_len()
    }

    pub fn default_start(&self) -> Hyperparameters {
        match self {
            ModelFamily::ZeroMeanSe => Hyperparameters::se(1.0, 1.0, 0.1),
            _ => Hyperparameters::poly(1.0, 1.0, 0.1),
        }
    }

    fn check(&self, theta: &Hyperparameters) -> Result<()> {
        let second = match self {
            ModelFamily::ZeroMeanSe => theta.length_scale,
            _ => theta.offset,
        };
        if !(theta.sigma_f > 0.0 && second > 0.0 && theta.sigma_y > 0.0)
            || !(theta.sigma_f.is_finite() && second.is_finite() && theta.sigma_y.is_finite())
        {
            return Err(Error::invalid(format!(
                "{self}: kernel and noise scales must be finite and strictly positive"
            )));
        }
        let want = self.mean_len();
        if want > 0 && !theta.mean_coeffs.is_empty() && theta.mean_coeffs.len() != want {
            return Err(Error::invalid(format!(
                "{self}: expected {want} mean coefficients, got {}",
                theta.mean_coeffs.len()
            )));
        }
        Ok(())
    }

    fn pack(&self, theta: &Hyperparameters) -> Vec<f64> {
        let second = match self {
            ModelFamily::ZeroMeanSe => theta.length_scale,
            _ => theta.offset,
        };
        let mut v = vec![theta.sigma_f.ln(), second.ln(), theta.sigma_y.ln()];
        v.extend_from_slice(&theta.mean_coeffs[..self.mean_len()]);
        v
    }

    fn unpack(&self, v: &[f64]) -> Hyperparameters {
        let e = |t: f64| t.clamp(-LOG_BOUND, LOG_BOUND).exp();
        let mut theta = match self {
            ModelFamily::ZeroMeanSe => Hyperparameters::se(e(v[0]), e(v[1]), e(v[2])),
            _ => Hyperparameters::poly(e(v[0]), e(v[1]), e(v[2])),
        };
        theta.mean_coeffs = v[3..].to_vec();
        theta
    }

    /// GP model for parameters in model coordinates.
    pub fn build(&self, theta: &Hyperparameters, standardizer: Standardizer) -> Result<GpModel> {
        let (mean, cov) = match self {
            ModelFamily::ZeroMeanSe => (
                MeanFunction::Zero,
                Covariance::SquaredExponential {
                    sigma_f: theta.sigma_f,
                    length_scale: theta.length_scale,
                },
            ),
            ModelFamily::ZeroMeanPoly { order } => (
                MeanFunction::Zero,
                Covariance::Polynomial {
                    sigma_f: theta.sigma_f,
                    offset: theta.offset,
                    order: *order,
                },
            ),
            ModelFamily::PolyMeanPoly { order } => {
                if theta.mean_coeffs.len() != *order as usize + 1 {
                    return Err(Error::invalid(format!(
                        "{self}: expected {} mean coefficients",
                        order + 1
                    )));
                }
                (
                    MeanFunction::Polynomial(theta.mean_coeffs.clone()),
                    Covariance::Polynomial {
                        sigma_f: theta.sigma_f,
                        offset: theta.offset,
                        order: *order,
                    },
                )
            }
        };
        GpModel::new(
            mean,
            cov,
            NoiseModel::Constant {
                sigma_y: theta.sigma_y,
            },
            standardizer,
        )
    }

    /// Converts model-coordinate parameters to raw units. Exact for the
    /// shift-free standardizers used by training.
    pub fn to_raw(&self, theta: &Hyperparameters, s: &Standardizer) -> Hyperparameters {
        let (xs, ys) = (s.x_scale, s.y_scale);
        let mut r = theta.clone();
        r.sigma_y = theta.sigma_y * ys;
        match self {
            ModelFamily::ZeroMeanSe => {
                r.sigma_f = theta.sigma_f * ys;
                r.length_scale = theta.length_scale * xs;
            }
            ModelFamily::ZeroMeanPoly { order } | ModelFamily::PolyMeanPoly { order } => {
                r.sigma_f = theta.sigma_f * ys * xs.powi(-(*order as i32));
                r.offset = theta.offset * xs * xs;
            }
        }
        r.mean_coeffs = theta
            .mean_coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * ys * xs.powi(-(k as i32)))
            .collect();
        r
    }

    /// Inverse of [`ModelFamily::to_raw`].
    pub fn from_raw(&self, theta: &Hyperparameters, s: &Standardizer) -> Hyperparameters {
        let (xs, ys) = (s.x_scale, s.y_scale);
        let mut r = theta.clone();
        r.sigma_y = theta.sigma_y / ys;
        match self {
            ModelFamily::ZeroMeanSe => {
                r.sigma_f = theta.sigma_f / ys;
                r.length_scale = theta.length_scale / xs;
            }
            ModelFamily::ZeroMeanPoly { order } | ModelFamily::PolyMeanPoly { order } => {
                r.sigma_f = theta.sigma_f / ys * xs.powi(*order as i32);
                r.offset = theta.offset / (xs * xs);
            }
        }
        r.mean_coeffs = theta
            .mean_coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / ys * xs.powi(k as i32))
            .collect();
        r
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    /// Starts in addition to the provided one.
    pub extra_starts: usize,
    pub seed: u64,
    pub simplex: SimplexConfig,
    /// Coordinates to train in; `None` fits a shift-free scaling to the
    /// training data. Must have zero shifts.
    pub standardizer: Option<Standardizer>,
    /// Run starts concurrently. Timing runs turn this off.
    pub parallel: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            extra_starts: 7,
            seed: 0,
            simplex: SimplexConfig::default(),
            standardizer: None,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    /// Start point, raw units.
    pub start: Hyperparameters,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub family: ModelFamily,
    /// Best parameters in raw units.
    pub best: Hyperparameters,
    /// Best parameters in model coordinates.
    pub best_model: Hyperparameters,
    pub standardizer: Standardizer,
    pub value: f64,
    pub starts: Vec<StartRecord>,
    pub seed: u64,
    pub elapsed_s: f64,
}

impl OptimizationReport {
    pub fn model(&self) -> Result<GpModel> {
        self.family.build(&self.best_model, self.standardizer)
    }
}

fn pooled_mean_fit(order: u32, trajectories: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let xs: Vec<f64> = trajectories.iter().flat_map(|t| t.0.iter().copied()).collect();
    let ys: Vec<f64> = trajectories.iter().flat_map(|t| t.1.iter().copied()).collect();
    let basis = BasisSet::polynomial(order).expect("polynomial basis");
    let phi = basis.design(&xs);
    lstsq_min_norm(&phi, &DVector::from_vec(ys), 1e-10)
        .map(|b| b.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; order as usize + 1])
}

/// Summed log marginal likelihood at model-coordinate parameters, over
/// trajectories given in raw units.
pub fn summed_objective(
    family: ModelFamily,
    theta: &Hyperparameters,
    standardizer: Standardizer,
    trajectories: &[Trajectory],
) -> Result<f64> {
    let gp = family.build(theta, standardizer)?;
    trajectories
        .iter()
        .map(|t| gp.log_marginal_likelihood(&t.xs, &t.ys))
        .sum()
}

fn optimize(
    family: ModelFamily,
    data: &[Trajectory],
    start_raw: &Hyperparameters,
    opts: &TrainOptions,
) -> Result<OptimizationReport> {
    let clock = Stopwatch::start();
    family.check(start_raw)?;
    let standardizer = match opts.standardizer {
        Some(s) => s,
        None => {
            let xs: Vec<f64> = data.iter().flat_map(|t| t.xs.iter().copied()).collect();
            let ys: Vec<f64> = data.iter().flat_map(|t| t.ys.iter().copied()).collect();
            Standardizer::fit(&xs, &ys, StandardizePolicy::Scale)
        }
    };
    if standardizer.x_shift != 0.0 || standardizer.y_shift != 0.0 {
        return Err(Error::invalid("training coordinates must not shift the data"));
    }
    let model_data: Vec<(Vec<f64>, Vec<f64>)> = data
        .iter()
        .map(|t| (standardizer.xs_to_model(&t.xs), standardizer.ys_to_model(&t.ys)))
        .collect();

    let mut start = family.from_raw(start_raw, &standardizer);
    if let ModelFamily::PolyMeanPoly { order } = family {
        if start.mean_coeffs.is_empty() {
            start.mean_coeffs = pooled_mean_fit(order, &model_data);
        }
    } else {
        start.mean_coeffs.clear();
    }

    let x0 = family.pack(&start);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![x0.clone()];
    let spread = START_SPREAD.ln();
    for _ in 0..opts.extra_starts {
        let v: Vec<f64> = x0
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if i < 3 {
                    c + rng.random_range(-spread..spread)
                } else {
                    c + rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        starts.push(v);
    }

    let identity = Standardizer::identity();
    let objective = |v: &[f64]| -> f64 {
        let theta = family.unpack(v);
        let Ok(gp) = family.build(&theta, identity) else {
            return f64::NEG_INFINITY;
        };
        let mut total = 0.0;
        for (xs, ys) in &model_data {
            match gp.log_marginal_likelihood(xs, ys) {
                Ok(l) => total += l,
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        total
    };
    let run = |x: &Vec<f64>| nelder_mead_max(objective, x, opts.simplex);
    let results = if opts.parallel {
        par_map(&starts, run)
    } else {
        starts.iter().map(run).collect()
    };

    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if r.value.is_finite() && best.is_none_or(|b| r.value > results[b].value) {
            best = Some(i);
        }
    }
    let records: Vec<StartRecord> = starts
        .iter()
        .zip(&results)
        .map(|(s, r)| StartRecord {
            start: family.to_raw(&family.unpack(s), &standardizer),
            value: r.value,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    let Some(b) = best else {
        let detail = records
            .iter()
            .map(|r| format!("start {:?}: objective {}", family.pack(&r.start), r.value))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::TrainingFailed(format!(
            "{family}: no start reached a finite log marginal likelihood ({detail})"
        )));
    };
    let y_jacobian: f64 = data.iter().map(|t| t.len() as f64).sum::<f64>() * standardizer.y_scale.ln();
    let best_model = family.unpack(&results[b].best);
    let best_raw = family.to_raw(&best_model, &standardizer);
    // objective values are reported as raw-data densities
    let records = records
        .into_iter()
        .map(|r| StartRecord {
            value: r.value - y_jacobian,
            ..r
        })
        .collect();
    Ok(OptimizationReport {
        family,
        best: best_raw,
        best_model,
        standardizer,
        value: results[b].value - y_jacobian,
        starts: records,
        seed: opts.seed,
        elapsed_s: clock.elapsed().as_secs_f64(),
    })
}

/// Maximizes the log marginal likelihood of one (current) trajectory.
pub fn fit_current(
    family: ModelFamily,
    xs: &[f64],
    ys: &[f64],
    start: &Hyperparameters,
    opts: &TrainOptions,
) -> Result<OptimizationReport> {
    let t = Trajectory::new("current", xs.to_vec(), ys.to_vec())?;
    optimize(family, std::slice::from_ref(&t), start, opts)
}

/// Maximizes the summed log marginal likelihood of previous trajectories.
/// `start` defaults to the family's unit-scale start with a pooled
/// least-squares mean.
pub fn fit_previous(
    family: ModelFamily,
    previous: &[Trajectory],
    start: Option<&Hyperparameters>,
    opts: &TrainOptions,
) -> Result<OptimizationReport> {
    if previous.is_empty() {
        return Err(Error::InsufficientTrajectories {
            required: 1,
            got: 0,
        });
    }
    let default;
    let start = match start {
        Some(s) => s,
        None => {
            // unit scale in model coordinates
            let xs: Vec<f64> = previous.iter().flat_map(|t| t.xs.iter().copied()).collect();
            let ys: Vec<f64> = previous.iter().flat_map(|t| t.ys.iter().copied()).collect();
            let s = opts
                .standardizer
                .unwrap_or_else(|| Standardizer::fit(&xs, &ys, StandardizePolicy::Scale));
            default = family.to_raw(&family.default_start(), &s);
            &default
        }
    };
    optimize(family, previous, start, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub order: u32,
    /// `(q, mean held-out MSE)` for every feasible candidate.
    pub scores: Vec<(u32, f64)>,
    /// Candidates skipped because some trajectory was too short.
    pub skipped: Vec<u32>,
}

/// Picks the polynomial order with the smallest mean held-out MSE when each
/// trajectory is fitted on a random 70% of its points. Near-ties go to the
/// smaller order.
pub fn select_order(previous: &[Trajectory], q_candidates: &[u32], split_seed: u64) -> Result<OrderSelection> {
    if q_candidates.is_empty() {
        return Err(Error::invalid("no candidate orders"));
    }
    if previous.is_empty() {
        return Err(Error::InsufficientTrajectories {
            required: 1,
            got: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = previous
        .iter()
        .map(|t| {
            let n = t.len();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let n_train = ((0.7 * n as f64).round() as usize).clamp(1.min(n), n.saturating_sub(1).max(1));
            let (a, b) = idx.split_at(n_train);
            let mut a = a.to_vec();
            let mut b = b.to_vec();
            a.sort_unstable();
            b.sort_unstable();
            (a, b)
        })
        .collect();

    let y_ms = {
        let ys: Vec<f64> = previous.iter().flat_map(|t| t.ys.iter().copied()).collect();
        ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64
    };

    let mut candidates: Vec<u32> = q_candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    'q: for &q in &candidates {
        let basis = BasisSet::polynomial(q)?;
        let mut total = 0.0;
        for (t, (train, test)) in previous.iter().zip(&splits) {
            if train.len() < q as usize + 1 || test.is_empty() {
                log::warn!("order {q} skipped: trajectory {} has too few points", t.id);
                skipped.push(q);
                continue 'q;
            }
            let pick = |ix: &[usize], v: &[f64]| ix.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let (xtr, ytr) = (pick(train, &t.xs), pick(train, &t.ys));
            let s = Standardizer::fit(&xtr, &ytr, StandardizePolicy::Full);
            let phi = basis.design(&s.xs_to_model(&xtr));
            let beta = lstsq_min_norm(&phi, &DVector::from_vec(s.ys_to_model(&ytr)), 1e-10)?;
            let xte = pick(test, &t.xs);
            let pred = basis.design(&s.xs_to_model(&xte)) * beta;
            let mse = test
                .iter()
                .zip(pred.iter())
                .map(|(&i, &p)| (s.y_from_model(p) - t.ys[i]).powi(2))
                .sum::<f64>()
                / test.len() as f64;
            total += mse;
        }
        scores.push((q, total / previous.len() as f64));
    }
    let best = scores
        .iter()
        .map(|s| s.1)
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (best + y_ms);
    let order = scores
        .iter()
        .find(|s| s.1 <= best + tol)
        .map(|s| s.0)
        .ok_or_else(|| Error::invalid("every candidate order was infeasible for some trajectory"))?;
    Ok(OrderSelection {
        order,
        scores,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_conversion_round_trips() {
        let s = Standardizer {
            x_scale: 3e4,
            y_scale: 2.5,
            ..Standardizer::identity()
        };
        for fam in [
            ModelFamily::ZeroMeanSe,
            ModelFamily::ZeroMeanPoly { order: 2 },
            ModelFamily::PolyMeanPoly { order: 2 },
        ] {
            let mut th = fam.default_start();
            if fam.mean_len() > 0 {
                th.mean_coeffs = vec![0.3, -1.0, 2.0];
            }
            let back = fam.from_raw(&fam.to_raw(&th, &s), &s);
            assert!((back.sigma_f - th.sigma_f).abs() < 1e-12);
            assert!((back.offset - th.offset).abs() < 1e-12);
            for (a, b) in back.mean_coeffs.iter().zip(&th.mean_coeffs) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn raw_and_model_parameters_describe_the_same_model() {
        let fam = ModelFamily::PolyMeanPoly { order: 2 };
        let s = Standardizer {
            x_scale: 40.0,
            y_scale: 3.0,
            ..Standardizer::identity()
        };
        let th = Hyperparameters::poly(0.7, 0.4, 0.2).with_mean_coeffs(vec![0.1, 0.5, -0.2]);
        let in_model = fam.build(&th, s).unwrap();
        let raw = fam.build(&fam.to_raw(&th, &s), Standardizer::identity()).unwrap();
        let xs = [3.0, 20.0, 55.0];
        let ys = [1.0, 2.0, 2.5];
        let a = in_model.log_marginal_likelihood(&xs, &ys).unwrap();
        let b = raw.log_marginal_likelihood(&xs, &ys).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn single_point_training_is_legal() {
        let fam = ModelFamily::ZeroMeanPoly { order: 1 };
        let r = fit_current(fam, &[2.0], &[1.0], &fam.default_start(), &TrainOptions::default()).unwrap();
        assert!(r.value.is_finite());
    }

    #[test]
    fn best_is_at_least_every_start() {
        let fam = ModelFamily::ZeroMeanSe;
        let xs: Vec<f64> = (0..15).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let opts = TrainOptions::default();
        let r = fit_current(fam, &xs, &ys, &fam.default_start(), &opts).unwrap();
        let t = Trajectory::new("c", xs, ys).unwrap();
        for rec in &r.starts {
            assert!(r.value >= rec.value);
            let at_start = summed_objective(
                fam,
                &fam.from_raw(&rec.start, &r.standardizer),
                r.standardizer,
                std::slice::from_ref(&t),
            )
            .unwrap();
            assert!(r.value >= at_start - 1e-9);
        }
        assert_eq!(r.starts.len(), 8);
    }

    #[test]
    fn noiseless_linear_ensemble_picks_order_one() {
        let ts: Vec<Trajectory> = (0..5)
            .map(|j| {
                let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
                let ys = xs.iter().map(|x| 1.0 + j as f64 + 0.5 * x).collect();
                Trajectory::new(j.to_string(), xs, ys).unwrap()
            })
            .collect();
        let sel = select_order(&ts, &[1, 2, 3], 7).unwrap();
        assert_eq!(sel.order, 1);
    }

    #[test]
    fn infeasible_orders_are_skipped() {
        let t = Trajectory::new("a", vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 4.0, 9.0]).unwrap();
        let sel = select_order(&[t.clone()], &[1, 5], 1).unwrap();
        assert_eq!(sel.skipped, vec![5]);
        assert!(select_order(&[t], &[5], 1).is_err());
    }
}
