//! Inferred GP models (IGPM): mean and covariance functions derived from the
//! sample statistics of per-trajectory basis-regression coefficients.
//!
//! With coefficients `β_j` fitted to every previous trajectory,
//! `m(x) = φ(x)ᵀ μ̂` and `k(x, x′) = φ(x)ᵀ Σ̂ φ(x′)`, which is Bayesian linear
//! regression with the weight prior `N(μ̂, Σ̂)` in function-space form.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisDescriptor, BasisSet};
use crate::dataset::Trajectory;
use crate::exec::par_map;
use crate::gp::{Covariance, GpModel, MeanFunction, NoiseModel};
use crate::linalg::{lstsq_min_norm, mirror_upper};
use crate::optim::bracketed_golden_max;
use crate::standardize::Standardizer;
use crate::{Error, Result};

/// Singular values below this fraction of the largest are dropped when
/// fitting coefficients.
pub const PINV_REL_TOL: f64 = 1e-10;
/// Diagonal perturbation (relative to `trace/p`) used when `m ≤ p`.
pub const PERTURBATION_REL: f64 = 1e-8;
/// Search range of the standardized noise scale for the ML estimator.
pub const ML_SIGMA_BOUNDS: (f64, f64) = (1e-6, 1e2);

const MODEL_FORMAT: &str = "priorgp-igpm";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorEstimator {
    /// Root mean square of the per-trajectory regression residuals.
    #[default]
    Rms,
    /// Maximizes the summed log marginal likelihood over a constant σ_y.
    MaxLikelihood,
    /// `σ_y(x) = σ_x·|dm/dx|`, with σ_x fitted to the last measured point of
    /// each trajectory.
    DerivativeScaled,
}

impl std::str::FromStr for ErrorEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rms" => Ok(ErrorEstimator::Rms),
            "max-likelihood" | "ml" => Ok(ErrorEstimator::MaxLikelihood),
            "derivative-scaled" | "scaled" => Ok(ErrorEstimator::DerivativeScaled),
            other => Err(Error::invalid(format!(
                "unknown error estimator `{other}` (expected rms, max-likelihood or derivative-scaled)"
            ))),
        }
    }
}

/// Sample mean and unbiased sample covariance of fitted coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
    /// Added to the diagonal of `cov` when `count ≤ p`; zero otherwise.
    pub perturbation: f64,
}

/// Least-squares coefficients of one trajectory, minimum-norm when the
/// design is rank deficient or underdetermined.
pub fn fit_coefficients(trajectory: &Trajectory, basis: &BasisSet) -> Result<DVector<f64>> {
    if trajectory.is_empty() {
        return Err(Error::invalid("cannot fit an empty trajectory"));
    }
    basis.check_domain(&trajectory.xs)?;
    let phi = basis.design(&trajectory.xs);
    let y = DVector::from_column_slice(&trajectory.ys);
    lstsq_min_norm(&phi, &y, PINV_REL_TOL)
}

/// Statistics of a `p × m` coefficient matrix (one column per trajectory).
pub fn coefficient_stats(b: &DMatrix<f64>) -> Result<CoefficientStats> {
    let (p, m) = b.shape();
    if m < 2 {
        return Err(Error::InsufficientTrajectories {
            required: 2,
            got: m,
        });
    }
    if p == 0 {
        return Err(Error::invalid("coefficient vectors are empty"));
    }
    let mean = b.column_mean();
    let mut centered = b.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = &centered * centered.transpose() / (m - 1) as f64;
    mirror_upper(&mut cov);
    let mut perturbation = 0.0;
    if m <= p {
        let trace = cov.trace();
        // An ensemble of identical coefficients has zero trace; fall back to
        // an absolute floor so the perturbation is still positive.
        perturbation = if trace > 0.0 {
            PERTURBATION_REL * trace / p as f64
        } else {
            PERTURBATION_REL
        };
        for i in 0..p {
            cov[(i, i)] += perturbation;
        }
    }
    Ok(CoefficientStats {
        mean,
        cov,
        count: m,
        perturbation,
    })
}

/// `sqrt( (1/m) Σ_j (1/n_j) Σ_i r_ij² )` with `r_j = Φ_j β_j − y_j`.
pub fn observation_error_rms(
    previous: &[Trajectory],
    basis: &BasisSet,
    coefficients: &[DVector<f64>],
) -> Result<f64> {
    if previous.len() != coefficients.len() {
        return Err(Error::invalid("one coefficient vector per trajectory required"));
    }
    if previous.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (t, beta) in previous.iter().zip(coefficients) {
        let r = basis.design(&t.xs) * beta - DVector::from_column_slice(&t.ys);
        acc += r.norm_squared() / t.len() as f64;
    }
    Ok((acc / previous.len() as f64).sqrt())
}

/// Result of the one-dimensional likelihood search for σ_y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseEstimate {
    pub sigma: f64,
    pub objective: f64,
    /// The optimum sits on the lower search bound, which happens for
    /// (nearly) noise-free data.
    pub at_lower_bound: bool,
}

fn summed_lml(gp: &GpModel, trajectories: &[Trajectory]) -> f64 {
    let mut total = 0.0;
    for t in trajectories {
        match gp.log_marginal_likelihood(&t.xs, &t.ys) {
            Ok(v) => total += v,
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    total
}

/// Log predictive density of each trajectory's last point given its earlier
/// points, summed over trajectories.
fn last_point_lml(gp: &GpModel, trajectories: &[Trajectory]) -> f64 {
    let mut total = 0.0;
    for t in trajectories {
        let n = t.len();
        let (x, y) = t.last();
        let pred = gp
            .condition(&t.xs[..n - 1], &t.ys[..n - 1])
            .and_then(|c| c.predict(&[x], false));
        let Ok(pred) = pred else {
            return f64::NEG_INFINITY;
        };
        let var = pred.variance[0] + pred.noise_variance[0];
        if !(var > 0.0) {
            return f64::NEG_INFINITY;
        }
        let r = y - pred.mean[0];
        total += -0.5 * (r * r / var + var.ln() + (2.0 * std::f64::consts::PI).ln());
    }
    total
}

const GOLDEN_GRID: usize = 41;
const GOLDEN_TOL: f64 = 1e-4;

/// Maximizes the summed log marginal likelihood over a constant noise
/// scale with the mean and covariance of `model` held fixed.
pub fn observation_error_ml(previous: &[Trajectory], model: &IgpmModel) -> Result<NoiseEstimate> {
    if previous.is_empty() {
        return Err(Error::InsufficientTrajectories {
            required: 1,
            got: 0,
        });
    }
    let base = model.gp();
    let (lo, hi) = (ML_SIGMA_BOUNDS.0.ln(), ML_SIGMA_BOUNDS.1.ln());
    let objective = |t: f64| match base.with_noise(NoiseModel::Constant { sigma_y: t.exp() }) {
        Ok(gp) => summed_lml(&gp, previous),
        Err(_) => f64::NEG_INFINITY,
    };
    let (t, v) = bracketed_golden_max(objective, lo, hi, GOLDEN_GRID, GOLDEN_TOL);
    if !v.is_finite() {
        return Err(Error::TrainingFailed(
            "log marginal likelihood is not finite for any noise level".into(),
        ));
    }
    Ok(NoiseEstimate {
        sigma: t.exp(),
        objective: v,
        at_lower_bound: t - lo < 1e-3,
    })
}

/// Fits σ_x of the derivative-scaled noise model by maximizing the
/// likelihood of each trajectory's last measured point. The search range
/// is `[1e-6, 1e2]` times the x extent of the data (model coordinates).
pub fn fit_sigma_x(previous: &[Trajectory], model: &IgpmModel) -> Result<NoiseEstimate> {
    if previous.is_empty() {
        return Err(Error::InsufficientTrajectories {
            required: 1,
            got: 0,
        });
    }
    let base = model.gp();
    let s = model.standardizer();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in previous {
        xmin = xmin.min(s.x_to_model(t.xs[0]));
        xmax = xmax.max(s.x_to_model(t.last().0));
    }
    let extent = if xmax > xmin { xmax - xmin } else { 1.0 };
    let lo = (ML_SIGMA_BOUNDS.0 * extent).ln();
    let hi = (ML_SIGMA_BOUNDS.1 * extent).ln();
    let objective = |t: f64| match base.with_noise(NoiseModel::DerivativeScaled { sigma_x: t.exp() }) {
        Ok(gp) => last_point_lml(&gp, previous),
        Err(_) => f64::NEG_INFINITY,
    };
    let (t, v) = bracketed_golden_max(objective, lo, hi, GOLDEN_GRID, GOLDEN_TOL);
    if !v.is_finite() {
        return Err(Error::TrainingFailed(
            "last-point likelihood is not finite for any σ_x".into(),
        ));
    }
    Ok(NoiseEstimate {
        sigma: t.exp(),
        objective: v,
        at_lower_bound: t - lo < 1e-3,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InferOptions {
    /// Standardize the pooled data before fitting (per the basis policy).
    /// When off, statistics are in raw coordinates.
    pub standardize: bool,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions { standardize: true }
    }
}

/// A fixed GP model built from coefficient statistics.
#[derive(Clone, Debug)]
pub struct IgpmModel {
    basis: Arc<BasisSet>,
    stats: CoefficientStats,
    estimator: ErrorEstimator,
    warnings: Vec<String>,
    gp: GpModel,
}

impl IgpmModel {
    /// Assembles a model from statistics expressed in model coordinates.
    pub fn from_parts(
        basis: Arc<BasisSet>,
        stats: CoefficientStats,
        noise: NoiseModel,
        standardizer: Standardizer,
    ) -> Result<Self> {
        let p = basis.len();
        if stats.mean.len() != p || stats.cov.shape() != (p, p) {
            return Err(Error::invalid(format!(
                "statistics do not match a basis of {p} functions"
            )));
        }
        let gp = GpModel::new(
            MeanFunction::Basis {
                basis: basis.clone(),
                weights: stats.mean.clone(),
            },
            Covariance::Basis {
                basis: basis.clone(),
                cov: stats.cov.clone(),
            },
            noise,
            standardizer,
        )?;
        Ok(IgpmModel {
            basis,
            stats,
            estimator: ErrorEstimator::Rms,
            warnings: Vec::new(),
            gp,
        })
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn stats(&self) -> &CoefficientStats {
        &self.stats
    }

    pub fn noise(&self) -> NoiseModel {
        self.gp.noise()
    }

    pub fn standardizer(&self) -> &Standardizer {
        self.gp.standardizer()
    }

    pub fn estimator(&self) -> ErrorEstimator {
        self.estimator
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Same statistics with a different noise model (model coordinates).
    pub fn with_noise(&self, noise: NoiseModel) -> Result<Self> {
        Ok(IgpmModel {
            gp: self.gp.with_noise(noise)?,
            ..self.clone()
        })
    }

    /// Constant noise in raw y units, as reported to users.
    pub fn sigma_y_raw(&self) -> Option<f64> {
        match self.noise() {
            NoiseModel::Constant { sigma_y } => Some(sigma_y * self.standardizer().y_scale),
            NoiseModel::DerivativeScaled { .. } => None,
        }
    }

    pub fn to_file(&self) -> IgpmModelFile {
        IgpmModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            basis: self.basis.descriptor().clone(),
            mean: self.stats.mean.iter().copied().collect(),
            cov: self
                .stats
                .cov
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            count: self.stats.count,
            perturbation: self.stats.perturbation,
            noise: self.noise(),
            estimator: self.estimator,
            standardizer: *self.standardizer(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn from_file(file: &IgpmModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("not an IGPM model file (format `{}`)", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model file version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let p = file.mean.len();
        if file.cov.len() != p || file.cov.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("model covariance must be p×p"));
        }
        let basis = Arc::new(BasisSet::from_descriptor(&file.basis)?);
        let stats = CoefficientStats {
            mean: DVector::from_vec(file.mean.clone()),
            cov: DMatrix::from_fn(p, p, |i, j| file.cov[i][j]),
            count: file.count,
            perturbation: file.perturbation,
        };
        let mut model = IgpmModel::from_parts(basis, stats, file.noise, file.standardizer)?;
        model.estimator = file.estimator;
        model.warnings = file.warnings.clone();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: IgpmModelFile = serde_json::from_str(&text)?;
        IgpmModel::from_file(&file)
    }
}

/// On-disk representation of an [`IgpmModel`]. Floats round-trip exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgpmModelFile {
    pub format: String,
    pub version: u32,
    pub basis: BasisDescriptor,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub count: usize,
    pub perturbation: f64,
    pub noise: NoiseModel,
    pub estimator: ErrorEstimator,
    pub standardizer: Standardizer,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Fits every previous trajectory, forms the coefficient statistics and
/// estimates the observation error. The returned model is fixed.
pub fn infer_model(
    previous: &[Trajectory],
    basis: Arc<BasisSet>,
    estimator: ErrorEstimator,
    options: InferOptions,
) -> Result<IgpmModel> {
    if previous.len() < 2 {
        return Err(Error::InsufficientTrajectories {
            required: 2,
            got: previous.len(),
        });
    }
    for t in previous {
        basis.check_domain(&t.xs).map_err(|e| e.in_trajectory(&t.id))?;
    }
    let standardizer = if options.standardize {
        let xs: Vec<f64> = previous.iter().flat_map(|t| t.xs.iter().copied()).collect();
        let ys: Vec<f64> = previous.iter().flat_map(|t| t.ys.iter().copied()).collect();
        Standardizer::fit(&xs, &ys, basis.standardize_policy())
    } else {
        Standardizer::identity()
    };
    let model_trajs: Vec<Trajectory> = previous
        .iter()
        .map(|t| Trajectory {
            id: t.id.clone(),
            xs: standardizer.xs_to_model(&t.xs),
            ys: standardizer.ys_to_model(&t.ys),
        })
        .collect();

    let fits = par_map(&model_trajs, |t| {
        fit_coefficients(t, &basis).map_err(|e| e.in_trajectory(&t.id))
    });
    let coefficients = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let b = DMatrix::from_columns(&coefficients);
    let stats = coefficient_stats(&b)?;

    let rms = observation_error_rms(&model_trajs, &basis, &coefficients)?;
    let mut model = IgpmModel::from_parts(
        basis,
        stats,
        NoiseModel::Constant { sigma_y: rms },
        standardizer,
    )?;
    model.estimator = estimator;
    match estimator {
        ErrorEstimator::Rms => {}
        ErrorEstimator::MaxLikelihood => {
            let est = observation_error_ml(previous, &model)?;
            if est.at_lower_bound {
                let msg = format!(
                    "max-likelihood noise estimate hit the lower search bound ({:e})",
                    ML_SIGMA_BOUNDS.0
                );
                log::warn!("{msg}");
                model.warnings.push(msg);
            }
            model = IgpmModel {
                gp: model.gp.with_noise(NoiseModel::Constant { sigma_y: est.sigma })?,
                ..model
            };
        }
        ErrorEstimator::DerivativeScaled => {
            let est = fit_sigma_x(previous, &model)?;
            if est.at_lower_bound {
                let msg = "σ_x estimate hit the lower search bound".to_string();
                log::warn!("{msg}");
                model.warnings.push(msg);
            }
            model = IgpmModel {
                gp: model
                    .gp
                    .with_noise(NoiseModel::DerivativeScaled { sigma_x: est.sigma })?,
                ..model
            };
        }
    }
    Ok(model)
}

/// Sample covariance of basis-fit reconstructions `Φ(grid) β̂_j` across
/// trajectories, in raw units. Used to compare against the model covariance.
pub fn reconstruction_covariance(model: &IgpmModel, previous: &[Trajectory], grid: &[f64]) -> Result<DMatrix<f64>> {
    if previous.len() < 2 {
        return Err(Error::InsufficientTrajectories {
            required: 2,
            got: previous.len(),
        });
    }
    let s = model.standardizer();
    let zg = s.xs_to_model(grid);
    model.basis().check_domain(&zg)?;
    let phi = model.basis().design(&zg);
    let mut curves = DMatrix::zeros(grid.len(), previous.len());
    for (j, t) in previous.iter().enumerate() {
        let mt = Trajectory {
            id: t.id.clone(),
            xs: s.xs_to_model(&t.xs),
            ys: s.ys_to_model(&t.ys),
        };
        let beta = fit_coefficients(&mt, model.basis()).map_err(|e| e.in_trajectory(&t.id))?;
        curves.set_column(j, &(&phi * beta));
    }
    let mean = curves.column_mean();
    for mut col in curves.column_iter_mut() {
        col -= &mean;
    }
    let m = previous.len() as f64;
    let mut c = &curves * curves.transpose() * (s.y_scale * s.y_scale / (m - 1.0));
    mirror_upper(&mut c);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: &str, xs: &[f64], ys: &[f64]) -> Trajectory {
        Trajectory::new(id, xs.to_vec(), ys.to_vec()).unwrap()
    }

    fn is_positive_definite(m: &DMatrix<f64>) -> bool {
        crate::linalg::JitteredCholesky::new(m).map(|c| c.jitter == 0.0).unwrap_or(false)
    }

    fn poly(q: u32) -> BasisSet {
        BasisSet::polynomial(q).unwrap()
    }

    #[test]
    fn exact_line_is_recovered() {
        let b = fit_coefficients(&traj("a", &[0.0, 1.0, 2.0], &[2.0, 5.0, 8.0]), &poly(1)).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let b = fit_coefficients(&traj("a", &[-1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]), &poly(1)).unwrap();
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn underdetermined_fit_is_minimum_norm() {
        let b = fit_coefficients(&traj("a", &[1.0], &[5.0]), &poly(1)).unwrap();
        assert!((b[0] - 2.5).abs() < 1e-12 && (b[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn stats_examples() {
        let s = coefficient_stats(&DMatrix::from_row_slice(1, 2, &[1.0, 3.0])).unwrap();
        assert_eq!(s.mean[0], 2.0);
        assert_eq!(s.cov[(0, 0)], 2.0);
        assert_eq!(s.perturbation, 0.0);

        let b = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        ]);
        let s = coefficient_stats(&b).unwrap();
        assert!((s.mean[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.cov[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.cov[(0, 1)] + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.cov[(0, 1)], s.cov[(1, 0)]);
    }

    #[test]
    fn rank_deficient_stats_are_perturbed() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 5.0]);
        let s = coefficient_stats(&b).unwrap();
        assert!(s.perturbation > 0.0);
        assert!(s.perturbation <= 1e-8 * (s.cov.trace() - 2.0 * s.perturbation) / 2.0 * (1.0 + 1e-12));
        assert!(is_positive_definite(&s.cov));
    }

    #[test]
    fn single_trajectory_is_insufficient() {
        let r = coefficient_stats(&DMatrix::from_row_slice(2, 1, &[1.0, 2.0]));
        assert!(matches!(r, Err(Error::InsufficientTrajectories { got: 1, .. })));
    }

    #[test]
    fn rms_examples() {
        let basis = poly(0);
        let t = traj("a", &[0.0, 1.0], &[1.0, -1.0]);
        let zero = DVector::from_vec(vec![0.0]);
        assert_eq!(observation_error_rms(&[t.clone()], &basis, &[zero.clone()]).unwrap(), 1.0);
        let t2 = traj("b", &[0.0, 1.0], &[2.0, -2.0]);
        let v = observation_error_rms(&[t, t2], &basis, &[zero.clone(), zero]).unwrap();
        assert!((v - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_ensemble() {
        let ts = vec![
            traj("1", &[0.0, 1.0, 2.0], &[2.0, 5.0, 8.0]),
            traj("2", &[0.5, 1.5, 3.0], &[3.5, 6.5, 11.0]),
            traj("3", &[-1.0, 4.0], &[-1.0, 14.0]),
        ];
        let m = infer_model(
            &ts,
            Arc::new(poly(1)),
            ErrorEstimator::Rms,
            InferOptions { standardize: false },
        )
        .unwrap();
        let s = m.stats();
        assert!((s.mean[0] - 2.0).abs() < 1e-12 && (s.mean[1] - 3.0).abs() < 1e-12);
        assert!(s.cov.abs().max() < 1e-20);
        assert!(m.sigma_y_raw().unwrap() < 1e-12);
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let ts = vec![
            traj("1", &[0.0, 1.0, 2.0], &[0.1, 1.3, 2.2]),
            traj("2", &[0.0, 1.0, 2.5], &[0.3, 0.9, 2.9]),
            traj("3", &[0.0, 1.5, 2.0], &[-0.2, 1.7, 1.1]),
        ];
        let m = infer_model(&ts, Arc::new(poly(1)), ErrorEstimator::Rms, InferOptions::default()).unwrap();
        let file = m.to_file();
        let text = serde_json::to_string(&file).unwrap();
        let back: IgpmModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let m2 = IgpmModel::from_file(&back).unwrap();
        assert_eq!(m2.stats(), m.stats());
        assert_eq!(m2.standardizer(), m.standardizer());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let ts = vec![traj("1", &[0.0, 1.0], &[0.0, 1.0]), traj("2", &[0.0, 1.0], &[1.0, 1.5])];
        let m = infer_model(&ts, Arc::new(poly(1)), ErrorEstimator::Rms, InferOptions::default()).unwrap();
        let mut f = m.to_file();
        f.version = 99;
        assert!(IgpmModel::from_file(&f).is_err());
    }

    #[test]
    fn fit_errors_carry_the_trajectory_id() {
        let cfg = crate::ParisLawConfig::virkler();
        let basis = Arc::new(BasisSet::paris(cfg).unwrap());
        let ts = vec![traj("ok", &[9.0, 20.0], &[0.0, 1.0]), traj("bad", &[5.0, 20.0], &[0.0, 1.0])];
        let err = infer_model(&ts, basis, ErrorEstimator::Rms, InferOptions::default()).unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");
    }
}
