//! Affine maps between raw data coordinates and the model coordinates in
//! which all Gram-matrix work happens.

use serde::{Deserialize, Serialize};

/// Which affine components are fitted from data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardizePolicy {
    /// Identity map.
    None,
    /// Only rescale y (no shift, x untouched). Needed by bases without a
    /// constant function, whose span is not closed under shifts.
    ScaleY,
    /// Rescale both axes by their root mean square, without shifts. Zero
    /// means, polynomial kernels and polynomial means keep their functional
    /// form under this map, so parameters convert exactly to raw units.
    Scale,
    /// Zero mean and unit variance on both axes.
    Full,
}

/// `x_model = (x − x_shift) / x_scale`, `y_model = (y − y_shift) / y_scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x_shift: f64,
    pub x_scale: f64,
    pub y_shift: f64,
    pub y_scale: f64,
}

impl Default for Standardizer {
    fn default() -> Self {
        Self::identity()
    }
}

fn rms(v: &[f64]) -> f64 {
    let r = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    if r.is_finite() && r > 0.0 {
        r
    } else {
        1.0
    }
}

fn mean_and_scale(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd.is_finite() && sd > 0.0 { sd } else { 1.0 })
}

impl Standardizer {
    pub const fn identity() -> Self {
        Standardizer {
            x_shift: 0.0,
            x_scale: 1.0,
            y_shift: 0.0,
            y_scale: 1.0,
        }
    }

    /// Fits the map on pooled samples.
    pub fn fit(xs: &[f64], ys: &[f64], policy: StandardizePolicy) -> Self {
        if xs.is_empty() || ys.is_empty() {
            return Self::identity();
        }
        match policy {
            StandardizePolicy::None => Self::identity(),
            StandardizePolicy::ScaleY => Standardizer {
                y_scale: rms(ys),
                ..Self::identity()
            },
            StandardizePolicy::Scale => Standardizer {
                x_scale: rms(xs),
                y_scale: rms(ys),
                ..Self::identity()
            },
            StandardizePolicy::Full => {
                let (x_shift, x_scale) = mean_and_scale(xs);
                let (y_shift, y_scale) = mean_and_scale(ys);
                Standardizer {
                    x_shift,
                    x_scale,
                    y_shift,
                    y_scale,
                }
            }
        }
    }

    #[inline]
    pub fn x_to_model(&self, x: f64) -> f64 {
        (x - self.x_shift) / self.x_scale
    }

    #[inline]
    pub fn y_to_model(&self, y: f64) -> f64 {
        (y - self.y_shift) / self.y_scale
    }

    #[inline]
    pub fn y_from_model(&self, y: f64) -> f64 {
        y * self.y_scale + self.y_shift
    }

    #[inline]
    pub fn var_from_model(&self, v: f64) -> f64 {
        v * self.y_scale * self.y_scale
    }

    pub fn xs_to_model(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.x_to_model(x)).collect()
    }

    pub fn ys_to_model(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.y_to_model(y)).collect()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_policy_gives_zero_mean_unit_variance() {
        let xs = [0.0, 1e4, 2e4, 3e4];
        let ys = [1.0, 1.5, 2.5, 4.0];
        let s = Standardizer::fit(&xs, &ys, StandardizePolicy::Full);
        let zx = s.xs_to_model(&xs);
        let m: f64 = zx.iter().sum::<f64>() / 4.0;
        let v: f64 = zx.iter().map(|z| z * z).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        for &y in &ys {
            assert!((s.y_from_model(s.y_to_model(y)) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_data_keeps_unit_scale() {
        let s = Standardizer::fit(&[1.0, 1.0], &[3.0, 3.0], StandardizePolicy::Full);
        assert_eq!(s.x_scale, 1.0);
        assert_eq!(s.y_scale, 1.0);
    }

    #[test]
    fn scale_only_policy_has_no_shift() {
        let s = Standardizer::fit(&[9.0, 10.0], &[3.0, 4.0], StandardizePolicy::ScaleY);
        assert_eq!(s.x_shift, 0.0);
        assert_eq!(s.x_scale, 1.0);
        assert_eq!(s.y_shift, 0.0);
        assert!((s.y_scale - (12.5f64).sqrt()).abs() < 1e-12);
        let s = Standardizer::fit(&[3.0, 4.0], &[0.0, 0.0], StandardizePolicy::Scale);
        assert_eq!(s.x_shift, 0.0);
        assert!((s.x_scale - (12.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(s.y_scale, 1.0);
    }
}
