//! Gaussian process primitives: kernels, mean functions, Gram assembly,
//! log marginal likelihood and posterior prediction.
//!
//! A [`GpModel`] stores its parameters in model coordinates (see
//! [`Standardizer`]); every public method takes and returns raw data
//! coordinates.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::linalg::{mirror_upper, JitteredCholesky};
use crate::standardize::Standardizer;
use crate::{Error, Result};

/// Relative slack under zero tolerated in posterior variances before they
/// are treated as a numerical failure.
const VARIANCE_TOLERANCE: f64 = 1e-6;

/// Free parameters of the predefined kernels and the polynomial mean.
/// Fields not used by a given family are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub sigma_f: f64,
    pub length_scale: f64,
    pub sigma_y: f64,
    pub offset: f64,
    #[serde(default)]
    pub mean_coeffs: Vec<f64>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            sigma_f: 1.0,
            length_scale: 1.0,
            sigma_y: 0.1,
            offset: 1.0,
            mean_coeffs: Vec::new(),
        }
    }
}

impl Hyperparameters {
    pub fn se(sigma_f: f64, length_scale: f64, sigma_y: f64) -> Self {
        Hyperparameters {
            sigma_f,
            length_scale,
            sigma_y,
            ..Default::default()
        }
    }

    pub fn poly(sigma_f: f64, offset: f64, sigma_y: f64) -> Self {
        Hyperparameters {
            sigma_f,
            offset,
            sigma_y,
            ..Default::default()
        }
    }

    pub fn with_mean_coeffs(mut self, c: Vec<f64>) -> Self {
        self.mean_coeffs = c;
        self
    }
}

fn finite(vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("non-finite kernel input"))
    }
}

/// Squared-exponential kernel plus diagonal noise:
/// `σ_f² exp(−(x−x′)²/(2ℓ²)) + σ_y² [same_index]`.
pub fn kernel_se(x: f64, xp: f64, theta: &Hyperparameters, same_index: bool) -> Result<f64> {
    finite(&[x, xp, theta.sigma_f, theta.length_scale, theta.sigma_y])?;
    if theta.sigma_f <= 0.0 || theta.length_scale <= 0.0 || theta.sigma_y < 0.0 {
        return Err(Error::invalid("kernel_se needs σ_f, ℓ > 0 and σ_y ≥ 0"));
    }
    let noise = if same_index { theta.sigma_y.powi(2) } else { 0.0 };
    Ok(se(x, xp, theta.sigma_f, theta.length_scale) + noise)
}

/// Polynomial kernel plus diagonal noise: `σ_f² (x x′ + b)^q + σ_y² [same_index]`.
pub fn kernel_poly(
    x: f64,
    xp: f64,
    theta: &Hyperparameters,
    q: u32,
    same_index: bool,
) -> Result<f64> {
    finite(&[x, xp, theta.sigma_f, theta.offset, theta.sigma_y])?;
    if q < 1 {
        return Err(Error::invalid("polynomial kernel order must be at least 1"));
    }
    if theta.sigma_f <= 0.0 || theta.offset < 0.0 || theta.sigma_y < 0.0 {
        return Err(Error::invalid("kernel_poly needs σ_f > 0 and b, σ_y ≥ 0"));
    }
    let noise = if same_index { theta.sigma_y.powi(2) } else { 0.0 };
    Ok(poly(x, xp, theta.sigma_f, theta.offset, q) + noise)
}

/// `Σ_k c_k x^(k−1)`, evaluated by Horner's rule.
pub fn mean_poly(x: f64, c: &[f64]) -> Result<f64> {
    if c.is_empty() {
        return Err(Error::invalid("polynomial mean needs at least one coefficient"));
    }
    if !x.is_finite() || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite mean input"));
    }
    Ok(horner(x, c))
}

#[inline]
fn se(x: f64, xp: f64, sigma_f: f64, ell: f64) -> f64 {
    let d = x - xp;
    sigma_f * sigma_f * (-d * d / (2.0 * ell * ell)).exp()
}

#[inline]
fn poly(x: f64, xp: f64, sigma_f: f64, b: f64, q: u32) -> f64 {
    sigma_f * sigma_f * (x * xp + b).powi(q as i32)
}

#[inline]
fn horner(x: f64, c: &[f64]) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

fn horner_derivative(x: f64, c: &[f64]) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck)
}

#[derive(Clone, Debug)]
pub enum MeanFunction {
    Zero,
    /// Coefficients of `1, x, …, x^q`.
    Polynomial(Vec<f64>),
    /// `φ(x)ᵀ w`.
    Basis {
        basis: Arc<BasisSet>,
        weights: DVector<f64>,
    },
}

impl MeanFunction {
    fn value(&self, x: f64, buf: &mut Vec<f64>) -> f64 {
        match self {
            MeanFunction::Zero => 0.0,
            MeanFunction::Polynomial(c) => horner(x, c),
            MeanFunction::Basis { basis, weights } => {
                buf.resize(basis.len(), 0.0);
                basis.eval_into(x, buf);
                buf.iter().zip(weights.iter()).map(|(a, b)| a * b).sum()
            }
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            MeanFunction::Zero => 0.0,
            MeanFunction::Polynomial(c) => horner_derivative(x, c),
            MeanFunction::Basis { basis, weights } => {
                let mut d = vec![0.0; basis.len()];
                basis.derivative_into(x, &mut d);
                d.iter().zip(weights.iter()).map(|(a, b)| a * b).sum()
            }
        }
    }
}

/// Noise-free covariance functions. Observation noise is a separate
/// [`NoiseModel`].
#[derive(Clone, Debug)]
pub enum Covariance {
    SquaredExponential { sigma_f: f64, length_scale: f64 },
    Polynomial { sigma_f: f64, offset: f64, order: u32 },
    /// `φ(x)ᵀ Σ φ(x′)`.
    Basis { basis: Arc<BasisSet>, cov: DMatrix<f64> },
}

impl Covariance {
    /// Covariance block between two point sets (model coordinates).
    fn cross(&self, a: &[f64], b: &[f64]) -> DMatrix<f64> {
        match self {
            Covariance::SquaredExponential {
                sigma_f,
                length_scale,
            } => DMatrix::from_fn(a.len(), b.len(), |i, j| se(a[i], b[j], *sigma_f, *length_scale)),
            Covariance::Polynomial {
                sigma_f,
                offset,
                order,
            } => DMatrix::from_fn(a.len(), b.len(), |i, j| {
                poly(a[i], b[j], *sigma_f, *offset, *order)
            }),
            Covariance::Basis { basis, cov } => {
                let pa = basis.design(a);
                let pb = basis.design(b);
                &pa * cov * pb.transpose()
            }
        }
    }

    /// Symmetric block on one point set; the upper triangle is mirrored so
    /// the result is exactly symmetric.
    fn gram(&self, a: &[f64]) -> DMatrix<f64> {
        let mut k = self.cross(a, a);
        mirror_upper(&mut k);
        k
    }

    fn diag(&self, a: &[f64]) -> Vec<f64> {
        match self {
            Covariance::SquaredExponential { sigma_f, .. } => vec![sigma_f * sigma_f; a.len()],
            Covariance::Polynomial {
                sigma_f,
                offset,
                order,
            } => a.iter().map(|&x| poly(x, x, *sigma_f, *offset, *order)).collect(),
            Covariance::Basis { basis, cov } => {
                let p = basis.design(a);
                let pc = &p * cov;
                (0..a.len()).map(|i| pc.row(i).dot(&p.row(i))).collect()
            }
        }
    }
}

/// Observation-noise standard deviation, in model coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    Constant { sigma_y: f64 },
    /// `σ_y(x) = σ_x · |dm/dx|`, which grows with the slope of the mean.
    DerivativeScaled { sigma_x: f64 },
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel::Constant { sigma_y: 0.0 }
    }

    fn std_dev(&self, mean: &MeanFunction, x: f64) -> f64 {
        match self {
            NoiseModel::Constant { sigma_y } => *sigma_y,
            NoiseModel::DerivativeScaled { sigma_x } => sigma_x * mean.derivative(x).abs(),
        }
    }
}

/// Posterior at a set of query locations, in raw coordinates.
#[derive(Clone, Debug)]
pub struct PosteriorPrediction {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    /// Variance of the latent function.
    pub variance: Vec<f64>,
    /// Observation-noise variance at each query location; add it to
    /// `variance` for the predictive distribution of a measurement.
    pub noise_variance: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
}

impl PosteriorPrediction {
    pub fn predictive_variance(&self) -> Vec<f64> {
        self.variance
            .iter()
            .zip(&self.noise_variance)
            .map(|(v, n)| v + n)
            .collect()
    }
}

/// Mean function, covariance function, noise model and the standardization
/// they are expressed in. Immutable.
#[derive(Clone, Debug)]
pub struct GpModel {
    mean: MeanFunction,
    cov: Covariance,
    noise: NoiseModel,
    standardizer: Standardizer,
}

impl GpModel {
    pub fn new(
        mean: MeanFunction,
        cov: Covariance,
        noise: NoiseModel,
        standardizer: Standardizer,
    ) -> Result<Self> {
        match &cov {
            Covariance::SquaredExponential {
                sigma_f,
                length_scale,
            } => {
                if !(*sigma_f > 0.0 && *length_scale > 0.0) {
                    return Err(Error::invalid("SE kernel needs σ_f, ℓ > 0"));
                }
            }
            Covariance::Polynomial {
                sigma_f,
                offset,
                order,
            } => {
                if !(*sigma_f > 0.0 && *offset >= 0.0 && *order >= 1) {
                    return Err(Error::invalid("polynomial kernel needs σ_f > 0, b ≥ 0, q ≥ 1"));
                }
            }
            Covariance::Basis { basis, cov } => {
                if cov.nrows() != basis.len() || cov.ncols() != basis.len() {
                    return Err(Error::invalid("basis covariance must be p×p"));
                }
            }
        }
        if let MeanFunction::Basis { basis, weights } = &mean {
            if weights.len() != basis.len() {
                return Err(Error::invalid("basis mean needs p weights"));
            }
        }
        let noise_ok = match noise {
            NoiseModel::Constant { sigma_y } => sigma_y >= 0.0 && sigma_y.is_finite(),
            NoiseModel::DerivativeScaled { sigma_x } => sigma_x >= 0.0 && sigma_x.is_finite(),
        };
        if !noise_ok {
            return Err(Error::invalid("noise scale must be finite and non-negative"));
        }
        Ok(GpModel {
            mean,
            cov,
            noise,
            standardizer,
        })
    }

    pub fn mean_function(&self) -> &MeanFunction {
        &self.mean
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Same mean and covariance with a different noise model.
    pub fn with_noise(&self, noise: NoiseModel) -> Result<Self> {
        GpModel::new(self.mean.clone(), self.cov.clone(), noise, self.standardizer)
    }

    fn basis(&self) -> Option<&BasisSet> {
        match (&self.cov, &self.mean) {
            (Covariance::Basis { basis, .. }, _) | (_, MeanFunction::Basis { basis, .. }) => {
                Some(basis)
            }
            _ => None,
        }
    }

    fn to_model_xs(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite location"));
        }
        let z = self.standardizer.xs_to_model(xs);
        if let Some(b) = self.basis() {
            b.check_domain(&z)?;
        }
        Ok(z)
    }

    fn means(&self, z: &[f64]) -> Vec<f64> {
        let mut buf = Vec::new();
        z.iter().map(|&x| self.mean.value(x, &mut buf)).collect()
    }

    fn noise_vars(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .map(|&x| self.noise.std_dev(&self.mean, x).powi(2))
            .collect()
    }

    /// Prior mean at raw locations.
    pub fn prior_mean(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let z = self.to_model_xs(xs)?;
        Ok(self
            .means(&z)
            .into_iter()
            .map(|m| self.standardizer.y_from_model(m))
            .collect())
    }

    /// Noise-free prior covariance between raw point sets, in raw units.
    pub fn prior_covariance(&self, xs: &[f64], xps: &[f64]) -> Result<DMatrix<f64>> {
        let a = self.to_model_xs(xs)?;
        let b = self.to_model_xs(xps)?;
        let s2 = self.standardizer.y_scale.powi(2);
        let mut k = if xs == xps { self.cov.gram(&a) } else { self.cov.cross(&a, &b) };
        k *= s2;
        Ok(k)
    }

    /// Observation-noise standard deviation at raw locations, in raw units.
    pub fn noise_std(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let z = self.to_model_xs(xs)?;
        Ok(self
            .noise_vars(&z)
            .into_iter()
            .map(|v| v.sqrt() * self.standardizer.y_scale)
            .collect())
    }

    /// Gram matrix in model units, with the noise model on the diagonal
    /// (one noise term per observation index).
    pub fn gram(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        if xs.is_empty() {
            return Err(Error::invalid("gram needs at least one location"));
        }
        let z = self.to_model_xs(xs)?;
        Ok(self.gram_model(&z))
    }

    fn gram_model(&self, z: &[f64]) -> DMatrix<f64> {
        let mut k = self.cov.gram(z);
        for (i, nv) in self.noise_vars(z).into_iter().enumerate() {
            k[(i, i)] += nv;
        }
        k
    }

    /// `log p(y | x)` of the raw observations:
    /// `−½ rᵀK⁻¹r − ½ log det K − (n/2) log 2π` in model units, plus the
    /// Jacobian `−n log(y_scale)` of the standardization.
    pub fn log_marginal_likelihood(&self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::invalid("need equally many (≥ 1) locations and values"));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("non-finite observation"));
        }
        let z = self.to_model_xs(xs)?;
        let k = self.gram_model(&z);
        let chol = JitteredCholesky::new(&k)?;
        let m = self.means(&z);
        let r = DVector::from_iterator(
            ys.len(),
            ys.iter()
                .zip(&m)
                .map(|(&y, &mu)| self.standardizer.y_to_model(y) - mu),
        );
        let alpha = chol.solve(&r);
        let n = ys.len() as f64;
        let lml = -0.5 * r.dot(&alpha) - 0.5 * chol.log_det() - 0.5 * n * (2.0 * PI).ln();
        Ok(lml - n * self.standardizer.y_scale.ln())
    }

    /// Conditions the model on observations for repeated queries.
    pub fn condition(&self, xs_obs: &[f64], ys_obs: &[f64]) -> Result<ConditionedGp<'_>> {
        if xs_obs.len() != ys_obs.len() {
            return Err(Error::invalid("locations and values differ in length"));
        }
        if ys_obs.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("non-finite observation"));
        }
        let z = self.to_model_xs(xs_obs)?;
        let k = self.gram_model(&z);
        let chol = JitteredCholesky::new(&k)?;
        let m = self.means(&z);
        let r = DVector::from_iterator(
            ys_obs.len(),
            ys_obs
                .iter()
                .zip(&m)
                .map(|(&y, &mu)| self.standardizer.y_to_model(y) - mu),
        );
        let alpha = chol.solve(&r);
        Ok(ConditionedGp {
            model: self,
            z_obs: z,
            chol,
            alpha,
        })
    }

    /// Posterior of the latent function at `xs_query` given observations.
    /// With no observations this is the prior.
    pub fn posterior(
        &self,
        xs_obs: &[f64],
        ys_obs: &[f64],
        xs_query: &[f64],
    ) -> Result<PosteriorPrediction> {
        self.condition(xs_obs, ys_obs)?.predict(xs_query, false)
    }

    /// Posterior variance only; it does not depend on observed values.
    pub fn posterior_variance(&self, xs_obs: &[f64], xs_query: &[f64]) -> Result<Vec<f64>> {
        let dummy = vec![0.0; xs_obs.len()];
        Ok(self.posterior(xs_obs, &dummy, xs_query)?.variance)
    }
}

/// A model conditioned on a fixed set of observations.
pub struct ConditionedGp<'a> {
    model: &'a GpModel,
    z_obs: Vec<f64>,
    chol: JitteredCholesky,
    alpha: DVector<f64>,
}

impl ConditionedGp<'_> {
    pub fn jitter(&self) -> f64 {
        self.chol.jitter
    }

    /// `mean = m(x) + k(x,X) K⁻¹ (y − m(X))`,
    /// `var = k(x,x) − k(x,X) K⁻¹ k(X,x)`. Query-side covariance excludes
    /// observation noise.
    pub fn predict(&self, xs_query: &[f64], full_covariance: bool) -> Result<PosteriorPrediction> {
        let m = self.model;
        let zq = m.to_model_xs(xs_query)?;
        let mq = m.means(&zq);
        let prior_diag = m.cov.diag(&zq);
        let s = &m.standardizer;

        let (mean_model, var_model, cov_model) = if self.z_obs.is_empty() {
            let cov = full_covariance.then(|| m.cov.gram(&zq));
            (mq, prior_diag.clone(), cov)
        } else {
            let kqx = m.cov.cross(&zq, &self.z_obs);
            let mean: Vec<f64> = (0..zq.len())
                .map(|i| mq[i] + kqx.row(i).dot(&self.alpha.transpose()))
                .collect();
            // V = L⁻¹ k(X, x*), var = diag(k**) − colsum(V∘V)
            let v = self.chol.solve_lower(&kqx.transpose());
            let var: Vec<f64> = (0..zq.len())
                .map(|j| prior_diag[j] - v.column(j).norm_squared())
                .collect();
            let cov = full_covariance.then(|| {
                let mut c = m.cov.gram(&zq) - v.transpose() * &v;
                mirror_upper(&mut c);
                c
            });
            (mean, var, cov)
        };

        let mut variance = Vec::with_capacity(var_model.len());
        for (v, prior) in var_model.iter().zip(&prior_diag) {
            let tol = VARIANCE_TOLERANCE * (prior.abs() + self.mean_obs_diag());
            if *v < -tol {
                return Err(Error::NegativeVariance {
                    value: *v,
                    tolerance: tol,
                });
            }
            variance.push(s.var_from_model(v.max(0.0)));
        }
        let noise_variance = m
            .noise_vars(&zq)
            .into_iter()
            .map(|v| s.var_from_model(v))
            .collect();
        Ok(PosteriorPrediction {
            x: xs_query.to_vec(),
            mean: mean_model.into_iter().map(|v| s.y_from_model(v)).collect(),
            variance,
            noise_variance,
            covariance: cov_model.map(|c| c * s.y_scale.powi(2)),
        })
    }

    fn mean_obs_diag(&self) -> f64 {
        let l = self.chol.factor.l_dirty();
        if l.nrows() == 0 {
            0.0
        } else {
            (0..l.nrows()).map(|i| l[(i, i)].powi(2)).sum::<f64>() / l.nrows() as f64
        }
    }
}
