mod common;

use proptest::prelude::*;
use rwlasso::diagnostics::selection_probabilities;
use rwlasso::linalg::Matrix;
use rwlasso::model::Dataset;
use rwlasso::sampler::{
    cross_validate, cross_validate_both, default_lambda_grid, one_step_sample, residual_bootstrap,
    residual_bootstrap_with, two_step_sample, CvMode, SampleBatch,
};
use rwlasso::sim::{generate_dataset, CovKind, ErrorLaw, SimSetting};
use rwlasso::solver::{solve_lasso, SolverConfig};
use rwlasso::weights::{draw_weights, WeightDistribution, WeightScheme};

fn dataset(x: &[Vec<f64>], y: &[f64]) -> Dataset {
    Dataset::from_centered(Matrix::from_rows(x).unwrap(), y.to_vec()).unwrap()
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn constant_weights_reproduce_the_lasso() {
    let mut rng = common::rng(1);
    let (x, y) = common::random_problem(&mut rng, 40, 6, 3);
    let data = dataset(&x, &y);
    let ones = WeightDistribution::Uniform { a: 1.0, b: 1.0 };
    let plain = solve_lasso(&data, 8.0, &cfg()).unwrap();
    for scheme in WeightScheme::ALL {
        let batch = one_step_sample(&data, 8.0, 3, &ones, scheme, 9, &cfg()).unwrap();
        for b in 0..3 {
            for (a, c) in batch.draw(b).iter().zip(&plain.beta) {
                assert!((a - c).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn unpenalized_one_step_centers_on_ols() {
    let mut rng = common::rng(2);
    let (x, y) = common::random_problem(&mut rng, 1000, 4, 4);
    let data = dataset(&x, &y);
    let ols = common::weighted_ols(&x, &y, &vec![1.0; 1000]);
    let batch = one_step_sample(&data, 0.0, 500, &WeightDistribution::default(), WeightScheme::ObsOnly, 3, &cfg())
        .unwrap();
    for j in 0..4 {
        let col = batch.coordinate(j);
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        let se = sd / (col.len() as f64).sqrt();
        assert!((m - ols[j]).abs() < 3.0 * se + 1e-12, "coordinate {j}: {m} vs {}", ols[j]);
    }
}

#[test]
fn unpenalized_two_step_is_weighted_ols() {
    let mut rng = common::rng(3);
    let (x, y) = common::random_problem(&mut rng, 30, 5, 2);
    let data = dataset(&x, &y);
    let dist = WeightDistribution::default();
    let batch = two_step_sample(&data, 0.0, 5, &dist, WeightScheme::PerPenalty, 4, &cfg()).unwrap();
    for b in 0..5 {
        let w = draw_weights(&dist, WeightScheme::PerPenalty, 30, 5, 4, b as u64).unwrap();
        let oracle = common::weighted_ols(&x, &y, &w.w_obs);
        for (a, c) in batch.draw(b).iter().zip(&oracle) {
            assert!((a - c).abs() < 1e-9);
        }
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn batches_do_not_depend_on_worker_count() {
    let mut rng = common::rng(4);
    let (x, y) = common::random_problem(&mut rng, 60, 8, 3);
    let data = dataset(&x, &y);
    let dist = WeightDistribution::default();
    let run = |threads| -> Vec<SampleBatch> {
        in_pool(threads, || {
            vec![
                one_step_sample(&data, 5.0, 64, &dist, WeightScheme::SharedPenalty, 21, &cfg()).unwrap(),
                two_step_sample(&data, 5.0, 64, &dist, WeightScheme::ObsOnly, 21, &cfg()).unwrap(),
                residual_bootstrap(&data, 5.0, 64, 21, &cfg()).unwrap(),
            ]
        })
    };
    assert_eq!(run(1), run(4));
    let grid = default_lambda_grid(&data, 30, 1e-3);
    let cv = |threads| in_pool(threads, || cross_validate_both(&data, 5, &grid, 8, &cfg()).unwrap());
    assert_eq!(cv(1), cv(3));
}

#[test]
fn residual_bootstrap_degenerate_cases() {
    let mut rng = common::rng(5);
    let (x, _) = common::random_problem(&mut rng, 40, 5, 0);
    let beta0 = [1.0, -2.0, 0.5, 0.0, 3.0];
    let y: Vec<f64> = x.iter().map(|r| r.iter().zip(&beta0).map(|(a, b)| a * b).sum()).collect();
    let data = dataset(&x, &y);
    let batch = residual_bootstrap(&data, 0.0, 20, 6, &cfg()).unwrap();
    for b in 0..20 {
        for (a, c) in batch.draw(b).iter().zip(&beta0) {
            assert!((a - c).abs() < 1e-8);
        }
    }

    let (x, y) = common::random_problem(&mut rng, 40, 5, 3);
    let data = dataset(&x, &y);
    let base = solve_lasso(&data, 6.0, &cfg()).unwrap();
    let identity = |_: u64| (0..40).collect::<Vec<usize>>();
    let batch = residual_bootstrap_with(&data, 6.0, 1, 0, &cfg(), &identity).unwrap();
    for (a, c) in batch.draw(0).iter().zip(&base.beta) {
        assert!((a - c).abs() < 1e-9);
    }
}

#[test]
fn all_null_grid_ties_to_the_largest_lambda() {
    let mut rng = common::rng(6);
    let (x, y) = common::random_problem(&mut rng, 50, 4, 0);
    let data = dataset(&x, &y);
    let top = default_lambda_grid(&data, 1, 1.0)[0];
    let grid = [40.0 * top, 20.0 * top, 10.0 * top];
    for mode in [CvMode::OneStepLasso, CvMode::TwoStepLassoLs] {
        let cv = cross_validate(&data, 5, &grid, mode, 1, &cfg()).unwrap();
        assert_eq!(cv.chosen_lambda, grid[0]);
        assert!(cv.cv_error.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn cv_rejects_bad_arguments() {
    let mut rng = common::rng(7);
    let (x, y) = common::random_problem(&mut rng, 20, 3, 1);
    let data = dataset(&x, &y);
    assert!(cross_validate(&data, 1, &[1.0], CvMode::OneStepLasso, 0, &cfg()).is_err());
    assert!(cross_validate(&data, 21, &[1.0], CvMode::OneStepLasso, 0, &cfg()).is_err());
    assert!(cross_validate(&data, 5, &[1.0, 2.0], CvMode::OneStepLasso, 0, &cfg()).is_err());
    assert!(cross_validate(&data, 5, &[], CvMode::OneStepLasso, 0, &cfg()).is_err());
}

#[test]
fn setting_two_draws_are_not_degenerate() {
    let s = SimSetting::table1(2).unwrap();
    let (train, _, _) = generate_dataset(&s, 0, 42).unwrap();
    let batch = one_step_sample(&train, 1.0, 300, &WeightDistribution::default(), WeightScheme::ObsOnly, 1, &cfg())
        .unwrap();
    for j in 0..train.p() {
        let col = batch.coordinate(j);
        let m = col.iter().sum::<f64>() / col.len() as f64;
        assert!(col.iter().map(|v| (v - m).powi(2)).sum::<f64>() > 0.0);
    }
}

#[test]
fn weighted_draws_concentrate_as_n_grows() {
    let mut means = Vec::new();
    for n in [100, 400, 1600] {
        let s = SimSetting {
            id: None,
            n,
            p: 10,
            q: 6,
            error_law: ErrorLaw::StdNormal,
            cov: CovKind::Sigma1,
            replicates: 1,
            draws: 500,
        };
        let (train, truth, _) = generate_dataset(&s, 0, 7).unwrap();
        let lambda = 2.0 * (n as f64).sqrt();
        let batch =
            two_step_sample(&train, lambda, 500, &WeightDistribution::default(), WeightScheme::ObsOnly, 3, &cfg())
                .unwrap();
        let dist: f64 = (0..500)
            .map(|b| {
                batch
                    .draw(b)
                    .iter()
                    .zip(&truth.beta0)
                    .map(|(a, c)| (a - c).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / 500.0;
        means.push(dist);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn two_step_draws_are_exactly_sparse(seed in 0u64..5000, lambda in 0.5f64..40.0) {
        let mut rng = common::rng(seed);
        let (x, y) = common::random_problem(&mut rng, 30, 6, 2);
        let data = dataset(&x, &y);
        let batch = two_step_sample(&data, lambda, 20, &WeightDistribution::default(), WeightScheme::PerPenalty, seed, &cfg()).unwrap();
        for b in 0..20 {
            for (j, v) in batch.draw(b).iter().enumerate() {
                if !batch.selected[b].contains(j) {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
        let freq: Vec<f64> = (0..6)
            .map(|j| batch.selected.iter().filter(|s| s.contains(j)).count() as f64 / 20.0)
            .collect();
        prop_assert_eq!(selection_probabilities(&batch), freq);
    }

    #[test]
    fn same_seed_same_batch(seed in 0u64..5000) {
        let mut rng = common::rng(seed);
        let (x, y) = common::random_problem(&mut rng, 25, 5, 2);
        let data = dataset(&x, &y);
        let d = WeightDistribution::Gamma { shape: 2.0, rate: 2.0 };
        let a = one_step_sample(&data, 3.0, 8, &d, WeightScheme::PerPenalty, seed, &cfg()).unwrap();
        let b = one_step_sample(&data, 3.0, 8, &d, WeightScheme::PerPenalty, seed, &cfg()).unwrap();
        prop_assert_eq!(a, b);
    }
}
