//! Hyperparameter training: generator recovery, objective additivity,
//! reproducibility and order selection.

use nalgebra::{DMatrix, DVector};
use priorgp::gp::{kernel_poly, kernel_se};
use priorgp::optim::{nelder_mead_max, SimplexConfig};
use priorgp::train::{fit_current, fit_previous, select_order, summed_objective, TrainOptions};
use priorgp::{Hyperparameters, ModelFamily, Standardizer, Trajectory};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// One draw from a zero-mean GP whose Gram (noise included) is `kernel`.
fn draw(xs: &[f64], kernel: impl Fn(f64, f64, bool) -> f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = xs.len();
    let k = DMatrix::from_fn(n, n, |i, j| kernel(xs[i], xs[j], i == j));
    let l = k.cholesky().expect("generator Gram is positive definite").l();
    let z = DVector::from_fn(n, |_, _| normal(rng));
    (l * z).iter().copied().collect()
}

fn ensemble(m: usize, n: usize, seed: u64, f: impl Fn(f64, f64, bool) -> f64 + Copy) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect();
    (0..m)
        .map(|j| Trajectory::new(j.to_string(), xs.clone(), draw(&xs, f, &mut rng)).unwrap())
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn within_factor(got: f64, truth: f64, factor: f64) -> bool {
    got >= truth / factor && got <= truth * factor
}

#[test]
fn squared_exponential_hyperparameters_are_recovered() {
    let truth = Hyperparameters::se(1.0, 0.5, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let xs: Vec<f64> = (0..100).map(|i| 5.0 * i as f64 / 99.0).collect();
    let ys = draw(&xs, |a, b, same| kernel_se(a, b, &truth, same).unwrap(), &mut rng);
    let fam = ModelFamily::ZeroMeanSe;
    let r = fit_current(fam, &xs, &ys, &fam.default_start(), &TrainOptions::default()).unwrap();
    assert!(within_factor(r.best.sigma_f, 1.0, 1.5), "{:?}", r.best);
    assert!(within_factor(r.best.length_scale, 0.5, 1.5), "{:?}", r.best);
    assert!((0.03..=0.08).contains(&r.best.sigma_y), "{:?}", r.best);
}

#[test]
fn polynomial_kernel_scale_is_recovered_from_an_ensemble() {
    let truth = Hyperparameters::poly(1.5, 0.5, 0.1);
    let ts = ensemble(20, 15, 7, |a, b, same| kernel_poly(a, b, &truth, 1, same).unwrap());
    let fam = ModelFamily::ZeroMeanPoly { order: 1 };
    let r = fit_previous(fam, &ts, None, &TrainOptions::default()).unwrap();
    assert!(within_factor(r.best.sigma_f, 1.5, 1.5), "{:?}", r.best);
}

#[test]
fn single_trajectory_objective_matches_current_training() {
    let fam = ModelFamily::PolyMeanPoly { order: 2 };
    let xs = vec![0.5, 1.0, 2.0, 3.5, 4.0];
    let ys = vec![1.0, 1.4, 2.9, 6.0, 7.1];
    let t = Trajectory::new("a", xs.clone(), ys.clone()).unwrap();
    let opts = TrainOptions {
        extra_starts: 2,
        ..TrainOptions::default()
    };
    let start = Hyperparameters::poly(1.0, 1.0, 0.2).with_mean_coeffs(vec![0.5, 0.5, 0.2]);
    let prev = fit_previous(fam, std::slice::from_ref(&t), Some(&start), &opts).unwrap();
    let cur = fit_current(fam, &xs, &ys, &start, &opts).unwrap();
    assert_eq!(prev.value, cur.value);
    assert_eq!(prev.best, cur.best);
}

#[test]
fn reports_are_reproducible() {
    let truth = Hyperparameters::poly(1.0, 0.3, 0.1);
    let ts = ensemble(6, 10, 1, |a, b, same| kernel_poly(a, b, &truth, 2, same).unwrap());
    let fam = ModelFamily::PolyMeanPoly { order: 2 };
    let opts = TrainOptions {
        seed: 99,
        ..TrainOptions::default()
    };
    let a = fit_previous(fam, &ts, None, &opts).unwrap();
    let b = fit_previous(fam, &ts, None, &opts).unwrap();
    let strip = |mut r: priorgp::OptimizationReport| {
        r.elapsed_s = 0.0;
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(strip(a), strip(b));
}

#[test]
fn sequential_and_parallel_starts_agree() {
    let ts = ensemble(4, 8, 3, |a, b, same| {
        kernel_se(a, b, &Hyperparameters::se(1.0, 0.7, 0.1), same).unwrap()
    });
    let fam = ModelFamily::ZeroMeanSe;
    let par = fit_previous(fam, &ts, None, &TrainOptions::default()).unwrap();
    let seq = fit_previous(
        fam,
        &ts,
        None,
        &TrainOptions {
            parallel: false,
            ..TrainOptions::default()
        },
    )
    .unwrap();
    assert_eq!(par.best, seq.best);
    assert_eq!(par.starts, seq.starts);
}

#[test]
fn quadratic_ensembles_select_order_two() {
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let ts: Vec<Trajectory> = (0..50)
            .map(|j| {
                let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0 * 3.0).collect();
                let c = 1.0 + 0.2 * normal(&mut rng);
                let ys = xs
                    .iter()
                    .map(|x| 0.5 + 0.3 * x + c * x * x + 0.05 * normal(&mut rng))
                    .collect();
                Trajectory::new(j.to_string(), xs, ys).unwrap()
            })
            .collect();
        if select_order(&ts, &[1, 2, 3, 4], seed).unwrap().order == 2 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "order 2 chosen in {hits}/100 runs");
}

#[test]
fn simplex_best_so_far_never_decreases() {
    let f = |v: &[f64]| -(v[0] - 1.0).powi(2) - 10.0 * (v[1] + 0.5).powi(2) + (3.0 * v[0]).sin();
    let r = nelder_mead_max(f, &[4.0, 3.0], SimplexConfig::default());
    assert!(!r.trace.is_empty());
    assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(*r.trace.last().unwrap(), r.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn duplicating_trajectories_doubles_the_objective(
        ys in prop::collection::vec(-2.0f64..2.0, 12),
        sigma_f in 0.2f64..3.0,
        b in 0.1f64..2.0,
        sigma_y in 0.05f64..1.0,
    ) {
        let fam = ModelFamily::PolyMeanPoly { order: 1 };
        let theta = Hyperparameters::poly(sigma_f, b, sigma_y).with_mean_coeffs(vec![0.2, -0.4]);
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.4).collect();
        let t1 = Trajectory::new("1", xs.clone(), ys[..6].to_vec()).unwrap();
        let t2 = Trajectory::new("2", xs, ys[6..].to_vec()).unwrap();
        let s = Standardizer::identity();
        let one = summed_objective(fam, &theta, s, &[t1.clone()]).unwrap();
        let two = summed_objective(fam, &theta, s, &[t2.clone()]).unwrap();
        let both = summed_objective(fam, &theta, s, &[t1.clone(), t2.clone()]).unwrap();
        let dup = summed_objective(fam, &theta, s, &[t1.clone(), t2.clone(), t1, t2]).unwrap();
        prop_assert!((both - (one + two)).abs() <= 1e-12 * both.abs().max(1.0));
        prop_assert!((dup - 2.0 * both).abs() <= 1e-12 * dup.abs().max(1.0));
    }

    #[test]
    fn trained_kernel_parameters_are_positive(
        ys in prop::collection::vec(-1e3f64..1e3, 3..10),
        seed in 0u64..1000,
    ) {
        let xs: Vec<f64> = (0..ys.len()).map(|i| 1.0 + i as f64).collect();
        for fam in [ModelFamily::ZeroMeanSe, ModelFamily::ZeroMeanPoly { order: 2 }] {
            let opts = TrainOptions { extra_starts: 1, seed, parallel: false, ..TrainOptions::default() };
            if let Ok(r) = fit_current(fam, &xs, &ys, &fam.default_start(), &opts) {
                prop_assert!(r.best.sigma_f > 0.0 && r.best.sigma_y > 0.0);
                prop_assert!(r.best.length_scale > 0.0 && r.best.offset > 0.0);
            }
        }
    }
}
