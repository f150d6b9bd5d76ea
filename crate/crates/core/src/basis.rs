//! Basis-function families for coefficient regression: monomials and
//! physics-informed bases obtained by integrating Paris' crack growth law.
//!
//! For a center-cracked plate of finite width `W` under stress range `Δσ`,
//! the cycle count needed to grow a crack from `a₀` to `a` is
//!
//! ```text
//! N(a; α) = 1 / (C · Δσ^α · π^(α/2)) · ∫_{a₀}^{a} (cos(π z / W) / z)^(α/2) dz
//! ```
//!
//! Each exponent `α` in the configuration contributes one basis function
//! `φ(a) = N(a; α)`. Its derivative is the (scaled) integrand itself.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::condition_number;
use crate::quadrature::{adaptive_simpson, SimpsonConfig};
use crate::standardize::StandardizePolicy;
use crate::{Error, Result};

/// Largest admissible condition number of the column-scaled probe design.
pub const MAX_CONDITION: f64 = 1e12;

/// Number of nodes in each tabulated Paris basis function.
pub const TABLE_NODES: usize = 2048;

const PROBE_POINTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParisLawConfig {
    /// Plate width `W` in mm.
    pub width: f64,
    /// Far-field stress range `Δσ∞` in MPa.
    pub stress_range: f64,
    /// Initial crack length `a₀` in mm.
    pub initial_crack: f64,
    /// Material constant `C`.
    pub material_c: f64,
    /// Exponents `α₁..α_p`.
    pub alphas: Vec<f64>,
}

impl ParisLawConfig {
    /// Specimen geometry and loading of Virkler's center-cracked 2024-T3
    /// panels, with a single exponent of 2.9.
    pub fn virkler() -> Self {
        ParisLawConfig {
            width: 152.4,
            stress_range: 48.26,
            initial_crack: 9.0,
            material_c: 8.7096e-11,
            alphas: vec![2.9],
        }
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.alphas = alphas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.width, self.stress_range, self.initial_crack, self.material_c]
            .iter()
            .chain(self.alphas.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("Paris configuration contains non-finite values"));
        }
        if !(self.initial_crack > 0.0 && self.initial_crack < 0.5 * self.width) {
            return Err(Error::invalid(format!(
                "initial crack {} must lie in (0, W/2 = {})",
                self.initial_crack,
                0.5 * self.width
            )));
        }
        if self.material_c <= 0.0 {
            return Err(Error::invalid("material constant C must be positive"));
        }
        if self.stress_range <= 0.0 {
            return Err(Error::invalid("stress range must be positive"));
        }
        if let Some(a) = self.alphas.iter().find(|a| **a < 0.0) {
            return Err(Error::invalid(format!("exponent {a} must be non-negative")));
        }
        Ok(())
    }

    /// Half-open domain `[a₀, W/2)` on which `cos(πa/W) > 0`.
    pub fn domain(&self) -> (f64, f64) {
        (self.initial_crack, 0.5 * self.width)
    }

    pub fn prefactor(&self, alpha: f64) -> f64 {
        1.0 / (self.material_c * self.stress_range.powf(alpha) * PI.powf(0.5 * alpha))
    }

    /// `(cos(πz/W) / z)^(α/2)`.
    #[inline]
    pub fn integrand(&self, z: f64, alpha: f64) -> f64 {
        ((PI * z / self.width).cos() / z).powf(0.5 * alpha)
    }

    fn check(&self, a: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if a.is_finite() && a >= lo && a < hi {
            Ok(())
        } else {
            Err(Error::Domain {
                x: a,
                lower: lo,
                upper: hi,
            })
        }
    }
}

/// Cycles to grow the crack from `a₀` to `a` under Paris' law with exponent
/// `alpha`, by adaptive quadrature. `N(a₀) = 0` exactly.
pub fn paris_cycles(a: f64, alpha: f64, cfg: &ParisLawConfig) -> Result<f64> {
    cfg.validate()?;
    cfg.check(a)?;
    if a == cfg.initial_crack {
        return Ok(0.0);
    }
    let integral = adaptive_simpson(
        |z| cfg.integrand(z, alpha),
        cfg.initial_crack,
        a,
        SimpsonConfig::default(),
    )?;
    Ok(cfg.prefactor(alpha) * integral)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BasisDescriptor {
    Polynomial {
        order: u32,
    },
    Paris {
        config: ParisLawConfig,
        /// Evaluate by direct quadrature instead of the interpolation table.
        #[serde(default)]
        direct: bool,
    },
}

impl fmt::Display for BasisDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisDescriptor::Polynomial { order } => write!(f, "polynomial(q={order})"),
            BasisDescriptor::Paris { config, .. } => {
                let a: Vec<String> = config.alphas.iter().map(|a| a.to_string()).collect();
                write!(f, "paris(alpha={{{}}})", a.join(","))
            }
        }
    }
}

/// Cumulative table of one Paris basis function with monotone cubic Hermite
/// interpolation.
#[derive(Clone, Debug)]
struct ParisTable {
    alpha: f64,
    prefactor: f64,
    ln_lo: f64,
    /// Node spacing in `ln z`; nodes are geometric so the relative
    /// resolution is uniform (the integrand is steepest near `a_0`).
    ln_step: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl ParisTable {
    fn build(cfg: &ParisLawConfig, alpha: f64) -> Result<Self> {
        let (lo, hi) = cfg.domain();
        let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
        let ln_step = (ln_hi - ln_lo) / (TABLE_NODES - 1) as f64;
        let nodes: Vec<f64> = (0..TABLE_NODES)
            .map(|i| match i {
                0 => lo,
                i if i == TABLE_NODES - 1 => hi,
                i => (ln_lo + i as f64 * ln_step).exp(),
            })
            .collect();
        let prefactor = cfg.prefactor(alpha);
        let mut values = Vec::with_capacity(TABLE_NODES);
        let mut acc = 0.0;
        values.push(0.0);
        for w in nodes.windows(2) {
            acc += if w[1] == hi {
                // the integrand vanishes like (W/2 - z)^(α/2) at the far end;
                // z = W/2 - u² removes the singular derivative for α < 2
                let span = (hi - w[0]).sqrt();
                adaptive_simpson(
                    |u| 2.0 * u * cfg.integrand(hi - u * u, alpha),
                    0.0,
                    span,
                    SimpsonConfig::default(),
                )?
            } else {
                adaptive_simpson(|z| cfg.integrand(z, alpha), w[0], w[1], SimpsonConfig::default())?
            };
            values.push(prefactor * acc);
        }
        let mut slopes: Vec<f64> = nodes
            .iter()
            .map(|&z| prefactor * cfg.integrand(z, alpha))
            .collect();
        fritsch_carlson(&nodes, &values, &mut slopes);
        Ok(ParisTable {
            alpha,
            prefactor,
            ln_lo,
            ln_step,
            nodes,
            values,
            slopes,
        })
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let t = (x.ln() - self.ln_lo) / self.ln_step;
        let mut i = (t.floor().max(0.0) as usize).min(TABLE_NODES - 2);
        // correct for rounding in the log index
        if x < self.nodes[i] && i > 0 {
            i -= 1;
        } else if x > self.nodes[i + 1] && i + 2 < TABLE_NODES {
            i += 1;
        }
        let h = self.nodes[i + 1] - self.nodes[i];
        let s = (x - self.nodes[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

/// Limits Hermite slopes so the interpolant stays monotone between nodes.
fn fritsch_carlson(nodes: &[f64], values: &[f64], slopes: &mut [f64]) {
    for i in 0..values.len() - 1 {
        let delta = (values[i + 1] - values[i]) / (nodes[i + 1] - nodes[i]);
        if delta == 0.0 {
            slopes[i] = 0.0;
            slopes[i + 1] = 0.0;
            continue;
        }
        let a = slopes[i] / delta;
        let b = slopes[i + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            slopes[i] = tau * a * delta;
            slopes[i + 1] = tau * b * delta;
        }
    }
}

#[derive(Clone, Debug)]
enum Family {
    Polynomial { order: u32 },
    Paris { config: ParisLawConfig, tables: Option<Vec<ParisTable>> },
}

/// An ordered, immutable set of scalar basis functions `φ₁..φ_p` with
/// analytic derivatives.
#[derive(Clone, Debug)]
pub struct BasisSet {
    descriptor: BasisDescriptor,
    family: Family,
}

impl BasisSet {
    /// Monomials `1, x, …, x^q`.
    pub fn polynomial(order: u32) -> Result<Self> {
        let basis = BasisSet {
            descriptor: BasisDescriptor::Polynomial { order },
            family: Family::Polynomial { order },
        };
        basis.check_conditioning()?;
        Ok(basis)
    }

    /// One Paris-law basis function per exponent, tabulated for fast
    /// evaluation.
    pub fn paris(config: ParisLawConfig) -> Result<Self> {
        Self::paris_with(config, false)
    }

    /// Like [`BasisSet::paris`]; with `direct` set, every evaluation runs
    /// the quadrature instead of the table.
    pub fn paris_with(config: ParisLawConfig, direct: bool) -> Result<Self> {
        config.validate()?;
        if config.alphas.is_empty() {
            return Err(Error::invalid("Paris basis needs at least one exponent"));
        }
        let tables = if direct {
            None
        } else {
            Some(
                config
                    .alphas
                    .iter()
                    .map(|&a| ParisTable::build(&config, a))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let basis = BasisSet {
            descriptor: BasisDescriptor::Paris {
                config: config.clone(),
                direct,
            },
            family: Family::Paris { config, tables },
        };
        basis.check_conditioning()?;
        Ok(basis)
    }

    pub fn from_descriptor(d: &BasisDescriptor) -> Result<Self> {
        match d {
            BasisDescriptor::Polynomial { order } => Self::polynomial(*order),
            BasisDescriptor::Paris { config, direct } => Self::paris_with(config.clone(), *direct),
        }
    }

    pub fn descriptor(&self) -> &BasisDescriptor {
        &self.descriptor
    }

    pub fn len(&self) -> usize {
        match &self.family {
            Family::Polynomial { order } => *order as usize + 1,
            Family::Paris { config, .. } => config.alphas.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether the span contains constants, which decides how data may be
    /// standardized without leaving the span.
    pub fn standardize_policy(&self) -> StandardizePolicy {
        match self.family {
            Family::Polynomial { .. } => StandardizePolicy::Full,
            Family::Paris { .. } => StandardizePolicy::ScaleY,
        }
    }

    /// `[lower, upper)`; unbounded for polynomials.
    pub fn domain(&self) -> (f64, f64) {
        match &self.family {
            Family::Polynomial { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Paris { config, .. } => config.domain(),
        }
    }

    pub fn check_domain(&self, xs: &[f64]) -> Result<()> {
        let (lo, hi) = self.domain();
        for &x in xs {
            let inside = x.is_finite() && x >= lo && (x < hi || hi == f64::INFINITY);
            if !inside {
                return Err(Error::Domain {
                    x,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }

    /// Writes `φ(x)` into `out` (length `p`). `x` must be in the domain.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        match &self.family {
            Family::Polynomial { .. } => {
                let mut v = 1.0;
                for o in out.iter_mut() {
                    *o = v;
                    v *= x;
                }
            }
            Family::Paris { config, tables } => match tables {
                Some(tables) => {
                    for (o, t) in out.iter_mut().zip(tables) {
                        *o = t.eval(x);
                    }
                }
                None => {
                    for (o, &alpha) in out.iter_mut().zip(&config.alphas) {
                        *o = paris_cycles(x, alpha, config).unwrap_or(f64::NAN);
                    }
                }
            },
        }
    }

    /// Writes `dφ/dx` into `out`.
    pub fn derivative_into(&self, x: f64, out: &mut [f64]) {
        match &self.family {
            Family::Polynomial { .. } => {
                let mut v = 1.0;
                for (k, o) in out.iter_mut().enumerate() {
                    if k == 0 {
                        *o = 0.0;
                    } else {
                        *o = k as f64 * v;
                        v *= x;
                    }
                }
            }
            Family::Paris { config, tables } => match tables {
                Some(tables) => {
                    for (o, t) in out.iter_mut().zip(tables) {
                        *o = t.prefactor * config.integrand(x, t.alpha);
                    }
                }
                None => {
                    for (o, &alpha) in out.iter_mut().zip(&config.alphas) {
                        *o = config.prefactor(alpha) * config.integrand(x, alpha);
                    }
                }
            },
        }
    }

    pub fn values(&self, x: f64) -> Result<Vec<f64>> {
        self.check_domain(&[x])?;
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    pub fn derivatives(&self, x: f64) -> Result<Vec<f64>> {
        self.check_domain(&[x])?;
        let mut out = vec![0.0; self.len()];
        self.derivative_into(x, &mut out);
        Ok(out)
    }

    /// Design matrix `Φ` with `Φ[i, k] = φ_k(x_i)`. Points are assumed to
    /// lie in the domain.
    pub fn design(&self, xs: &[f64]) -> DMatrix<f64> {
        let p = self.len();
        let mut m = DMatrix::zeros(xs.len(), p);
        let mut row = vec![0.0; p];
        for (i, &x) in xs.iter().enumerate() {
            self.eval_into(x, &mut row);
            for k in 0..p {
                m[(i, k)] = row[k];
            }
        }
        m
    }

    fn probe_grid(&self) -> Vec<f64> {
        let n = PROBE_POINTS.max(4 * self.len());
        match &self.family {
            Family::Polynomial { .. } => (0..n)
                .map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64)
                .collect(),
            Family::Paris { config, .. } => {
                let (lo, hi) = config.domain();
                (0..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
            }
        }
    }

    fn check_conditioning(&self) -> Result<()> {
        let p = self.len();
        if p < 2 {
            return Ok(());
        }
        let mut design = self.design(&self.probe_grid());
        for mut col in design.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col.unscale_mut(norm);
            }
        }
        let condition = condition_number(&design);
        if condition.is_finite() && condition < MAX_CONDITION {
            return Ok(());
        }
        // Report the most nearly collinear pair of columns.
        let mut worst = (0, 1, -1.0);
        for k in 0..p {
            for l in k + 1..p {
                let c = design.column(k).dot(&design.column(l)).abs();
                if c > worst.2 {
                    worst = (k, l, c);
                }
            }
        }
        let (k, l, cos) = worst;
        let detail = match &self.family {
            Family::Paris { config, .. } => format!(
                "exponents alpha={} and alpha={} are nearly collinear (|cos| = {cos:.15})",
                config.alphas[k], config.alphas[l]
            ),
            Family::Polynomial { .. } => {
                format!("monomials x^{k} and x^{l} are nearly collinear (|cos| = {cos:.15})")
            }
        };
        Err(Error::IllConditionedBasis { condition, detail })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_values_and_derivatives() {
        let b = BasisSet::polynomial(0).unwrap();
        assert_eq!(b.values(3.0).unwrap(), vec![1.0]);
        let b = BasisSet::polynomial(2).unwrap();
        assert_eq!(b.values(3.0).unwrap(), vec![1.0, 3.0, 9.0]);
        assert_eq!(b.derivatives(3.0).unwrap(), vec![0.0, 1.0, 6.0]);
    }

    #[test]
    fn vandermonde_is_invertible() {
        for q in 0..6u32 {
            let b = BasisSet::polynomial(q).unwrap();
            let xs: Vec<f64> = (0..=q).map(|i| i as f64 * 0.7 - 1.0).collect();
            let d = b.design(&xs);
            assert!(d.determinant().abs() > 1e-12, "q={q}");
        }
    }

    #[test]
    fn zero_exponent_collapses_integral() {
        let cfg = ParisLawConfig::virkler();
        let n = paris_cycles(20.0, 0.0, &cfg).unwrap();
        let exact = (20.0 - 9.0) / cfg.material_c;
        assert!(((n - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn cycles_outside_domain_fail() {
        let cfg = ParisLawConfig::virkler();
        assert!(matches!(paris_cycles(8.0, 2.9, &cfg), Err(Error::Domain { .. })));
        assert!(matches!(paris_cycles(76.2, 2.9, &cfg), Err(Error::Domain { .. })));
        assert_eq!(paris_cycles(9.0, 2.9, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn single_alpha_basis_vanishes_at_initial_crack() {
        let b = BasisSet::paris(ParisLawConfig::virkler()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.values(9.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn derivative_at_initial_crack_for_zero_alpha_is_inverse_c() {
        let cfg = ParisLawConfig::virkler().with_alphas(vec![0.0]);
        let b = BasisSet::paris(cfg.clone()).unwrap();
        assert_eq!(b.derivatives(9.0).unwrap()[0], 1.0 / cfg.material_c);
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let cfg = ParisLawConfig::virkler().with_alphas(vec![2.6, 3.2]);
        let tab = BasisSet::paris(cfg.clone()).unwrap();
        let direct = BasisSet::paris_with(cfg, true).unwrap();
        for &a in &[9.0, 9.013, 12.5, 30.0, 49.8, 70.0] {
            let t = tab.values(a).unwrap();
            let d = direct.values(a).unwrap();
            for (x, y) in t.iter().zip(&d) {
                let scale = y.abs().max(1.0);
                assert!((x - y).abs() / scale < 1e-9, "a={a}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn duplicated_exponent_is_rejected_with_pair() {
        let cfg = ParisLawConfig::virkler().with_alphas(vec![2.6, 2.9, 2.9]);
        match BasisSet::paris(cfg) {
            Err(Error::IllConditionedBasis { detail, .. }) => {
                assert!(detail.contains("alpha=2.9 and alpha=2.9"), "{detail}")
            }
            other => panic!("expected ill-conditioned basis, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = ParisLawConfig::virkler();
        cfg.initial_crack = 80.0;
        assert!(BasisSet::paris(cfg).is_err());
        let cfg = ParisLawConfig::virkler().with_alphas(vec![]);
        assert!(BasisSet::paris(cfg).is_err());
    }

    #[test]
    fn descriptor_round_trips_through_json() {
        let d = BasisDescriptor::Paris {
            config: ParisLawConfig::virkler().with_alphas(vec![2.6, 2.8, 3.0, 3.2]),
            direct: false,
        };
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<BasisDescriptor>(&s).unwrap(), d);
        assert_eq!(d.to_string(), "paris(alpha={2.6,2.8,3,3.2})");
    }
}
