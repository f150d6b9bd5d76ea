//! Adaptive Simpson quadrature with interval bisection.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct SimpsonConfig {
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for SimpsonConfig {
    fn default() -> Self {
        SimpsonConfig {
            rel_tol: 1e-10,
            max_depth: 40,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]`. An empty interval returns exactly zero.
///
/// The tolerance is relative to the magnitude of a coarse first estimate,
/// tightened by half at each bisection. Fails if any branch reaches
/// `max_depth` without meeting its local tolerance.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, cfg: SimpsonConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("quadrature bounds must be finite"));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(lo);
    let fb = f(hi);
    let m = 0.5 * (lo + hi);
    let fm = f(m);
    let whole = simpson(lo, hi, fa, fm, fb);

    // Coarse magnitude from a 16-panel composite rule so that a lucky
    // cancellation in the 3-point rule does not set a zero tolerance.
    let n = 16;
    let h = (hi - lo) / n as f64;
    let coarse: f64 = (0..n)
        .map(|i| {
            let x0 = lo + i as f64 * h;
            let x1 = x0 + h;
            simpson(x0, x1, f(x0).abs(), f(0.5 * (x0 + x1)).abs(), f(x1).abs())
        })
        .sum();
    let tol = cfg.rel_tol * coarse.max(f64::MIN_POSITIVE);

    let panel = Panel {
        a: lo,
        b: hi,
        fa,
        fm,
        fb,
        whole,
    };
    let value = recurse(&f, panel, tol, cfg.max_depth).ok_or(Error::Quadrature {
        lower: lo,
        upper: hi,
    })?;
    if value.is_finite() {
        Ok(sign * value)
    } else {
        Err(Error::Quadrature {
            lower: lo,
            upper: hi,
        })
    }
}

fn recurse<F: Fn(f64) -> f64>(f: &F, p: Panel, tol: f64, depth: u32) -> Option<f64> {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = recurse(
        f,
        Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
        },
        0.5 * tol,
        depth - 1,
    )?;
    let r = recurse(
        f,
        Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
        },
        0.5 * tol,
        depth - 1,
    )?;
    Some(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_up_to_cubic_are_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, SimpsonConfig::default())
            .unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let c = SimpsonConfig::default();
        let a = adaptive_simpson(f64::exp, 0.0, 1.0, c).unwrap();
        let b = adaptive_simpson(f64::exp, 1.0, 0.0, c).unwrap();
        assert_eq!(a, -b);
        assert!((a - (std::f64::consts::E - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(adaptive_simpson(|x| x, 3.0, 3.0, SimpsonConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn depth_exhaustion_is_reported() {
        let cfg = SimpsonConfig {
            rel_tol: 1e-14,
            max_depth: 2,
        };
        let r = adaptive_simpson(|x: f64| (50.0 * x).sin().abs(), 0.0, 3.0, cfg);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
