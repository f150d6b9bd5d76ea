//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::{Error, Result};

/// Relative jitter ladder, applied as `λ · mean(diag K)` after a failed
/// factorization. The leading zero is the unjittered attempt.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

/// A Cholesky factor together with the absolute jitter that was needed.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    /// Factorizes `k`, escalating diagonal jitter on failure.
    pub fn new(k: &DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if n == 0 {
            return Ok(JitteredCholesky {
                factor: Cholesky::new(DMatrix::zeros(0, 0)).expect("empty matrix factorizes"),
                jitter: 0.0,
            });
        }
        let mean_diag = k.diagonal().mean();
        let scale = if mean_diag.is_finite() && mean_diag > 0.0 {
            mean_diag
        } else {
            1.0
        };
        let mut last = 0.0;
        for lambda in JITTER_LADDER {
            let jitter = lambda * scale;
            last = jitter;
            let mut m = k.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            if let Some(factor) = Cholesky::new(m) {
                if factor.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                    return Ok(JitteredCholesky { factor, jitter });
                }
            }
        }
        Err(Error::NotPositiveDefinite { jitter: last })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    /// `L⁻¹ b` by forward substitution.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    /// `log det K = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        let l = self.factor.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// Minimum-norm least-squares solution via SVD, truncating singular values
/// below `rel_tol · σ_max`.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "design matrix has {} rows but {} targets",
            a.nrows(),
            b.len()
        )));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    svd.solve(b, rel_tol * smax).map_err(Error::invalid)
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

/// Copies the upper triangle onto the lower one so the result is bit-symmetric.
pub fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Symmetric square root factor `S` with `S Sᵀ = m` for a PSD matrix.
/// Eigenvalues slightly below zero (within `-tol`) are clamped.
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| l < -tol) {
        return None;
    }
    let mut s = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let r = l.max(0.0).sqrt();
        s.column_mut(j).scale_mut(r);
    }
    Some(s)
}

/// Two-sided standard-normal quantile: the `z` with `P(|Z| ≤ z) = level`.
pub fn two_sided_z(level: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    n.inverse_cdf(0.5 * (1.0 + level))
}
