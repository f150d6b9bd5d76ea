//! Derivative-free maximizers: Nelder–Mead simplex for hyperparameter
//! vectors and a bracketed golden-section search for scalar scales.

/// Outcome of one simplex run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective after each iteration (index 0 is the initial simplex).
    pub trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexConfig {
    /// Stop once `max − min` of the vertex objectives drops below this.
    pub spread_tol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig {
            spread_tol: 1e-8,
            max_iter: 500,
            initial_step: 0.5,
        }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `f` starting from `x0`. NaN objective values count as −∞.
pub fn nelder_mead_max<F>(f: F, x0: &[f64], cfg: SimplexConfig) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| sanitize(f(x));
    if n == 0 {
        let v = eval(x0);
        return SimplexResult {
            best: Vec::new(),
            value: v,
            iterations: 0,
            converged: true,
            trace: vec![v],
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += cfg.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    // descending: simplex[0] is the best vertex
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal))
    };
    order(&mut simplex);

    let mut trace = vec![simplex[0].1];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let spread = simplex[0].1 - simplex[n].1;
        if spread.is_finite() && spread < cfg.spread_tol {
            converged = true;
            break;
        }
        if simplex[0].1 == f64::NEG_INFINITY {
            // nothing finite to move towards
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr > simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let outside = fr > worst.1;
            let xc = along(if outside { -0.5 } else { 0.5 });
            let fc = eval(&xc);
            let accept = if outside { fc >= fr } else { fc > worst.1 };
            if accept {
                simplex[n] = (xc, fc);
            } else {
                // shrink towards the best vertex
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *v = eval(x);
                }
            }
        }
        order(&mut simplex);
        trace.push(simplex[0].1);
    }

    let (best, value) = simplex.swap_remove(0);
    SimplexResult {
        best,
        value,
        iterations,
        converged,
        trace,
    }
}

/// Scalar maximization over `[lo, hi]` (in whatever parameterization the
/// caller uses, typically a log scale): a coarse grid locates the best
/// bracket, golden-section refines it until the bracket is narrower than
/// `tol`. Returns `(argmax, max)`.
pub fn bracketed_golden_max<F>(f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let grid = grid.max(3);
    let pts: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let vals: Vec<f64> = pts.iter().map(|&t| sanitize(f(t))).collect();
    let mut k = 0;
    for i in 1..grid {
        if vals[i] > vals[k] {
            k = i;
        }
    }
    let mut a = pts[k.saturating_sub(1)];
    let mut b = pts[(k + 1).min(grid - 1)];
    let (mut best_t, mut best_v) = (pts[k], vals[k]);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = sanitize(f(c));
    let mut fd = sanitize(f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sanitize(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sanitize(f(d));
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best_v {
            best_t = t;
            best_v = v;
        }
    }
    (best_t, best_v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_quadratic_maximum() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 4.0 * (x[1] + 2.0).powi(2);
        let r = nelder_mead_max(f, &[0.0, 0.0], SimplexConfig::default());
        assert!(r.converged);
        assert!((r.best[0] - 1.0).abs() < 1e-3);
        assert!((r.best[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn simplex_trace_is_monotone() {
        let f = |x: &[f64]| -(x[0].powi(2) - x[1]).powi(2) - (1.0 - x[0]).powi(2);
        let r = nelder_mead_max(f, &[-1.2, 1.0], SimplexConfig::default());
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(r.trace.len(), r.iterations + 1);
    }

    #[test]
    fn simplex_tolerates_nan_regions() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { -(x[0] - 2.0).powi(2) };
        let r = nelder_mead_max(f, &[0.1], SimplexConfig::default());
        assert!((r.best[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn golden_finds_interior_and_boundary_maxima() {
        let (t, _) = bracketed_golden_max(|t| -(t - 0.3).powi(2), -5.0, 5.0, 41, 1e-6);
        assert!((t - 0.3).abs() < 1e-5);
        let (t, _) = bracketed_golden_max(|t| -t, -5.0, 5.0, 41, 1e-6);
        assert!((t + 5.0).abs() < 1e-5);
    }
}
