//! Order-statistic and interval properties of the conformal machinery,
//! including the full-sort oracle comparison and the calibration-set
//! self-coverage guarantee.

use cmco::data::QueryGrid;
use cmco::deeponet::{build_model, BranchConfig, BranchKind, TrunkConfig};
use cmco::nn::dense::Activation;
use cmco::nn::matrix::Matrix;
use cmco::nn::rng::RngStream;
use cmco::uq::{
    build_intervals, calibrate, conformal_quantile, empirical_coverage, failure_rate,
    mc_predict, nonconformity_scores, reduce_passes, ConformalCalibration, EnsembleStats,
};
use proptest::prelude::*;
use rand::Rng;

/// Full-sort oracle with exact integer rank arithmetic for alpha = a/1000:
/// `k = ceil((1000 - a)(n + 1) / 1000)` via integer division.
fn quantile_oracle(scores: &[f64], alpha_millis: u64) -> Option<f64> {
    let n = scores.len() as u64;
    let k = ((1000 - alpha_millis) * (n + 1)).div_ceil(1000);
    if k > n {
        return None;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(k - 1) as usize])
}

#[test]
fn quantile_matches_full_sort_oracle_across_sizes_and_levels() {
    let mut rng = RngStream::new(1234, 0).rng();
    for &alpha_millis in &[10u64, 50, 100] {
        let alpha = alpha_millis as f64 / 1000.0;
        for n in [19usize, 20, 47, 99, 100, 200, 500] {
            for _ in 0..20 {
                let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
                let oracle = quantile_oracle(&scores, alpha_millis);
                let impl_q = conformal_quantile(&scores, alpha);
                match oracle {
                    Some(expected) => assert_eq!(impl_q.unwrap(), expected, "n={n} alpha={alpha}"),
                    None => assert!(impl_q.is_err()),
                }
            }
        }
    }
}

#[test]
fn quantile_handles_duplicate_scores_exactly() {
    let scores = vec![1.0; 25];
    assert_eq!(conformal_quantile(&scores, 0.05).unwrap(), 1.0);
    let mut mixed = vec![2.0; 30];
    mixed.extend(vec![5.0; 10]);
    let oracle = quantile_oracle(&mixed, 50).unwrap();
    assert_eq!(conformal_quantile(&mixed, 0.05).unwrap(), oracle);
}

fn synthetic_stats(seed: u64, n: usize, p: usize) -> (Vec<EnsembleStats>, Matrix) {
    let mut rng = RngStream::new(seed, 0).rng();
    let mut stats = Vec::with_capacity(n);
    let mut truths = Matrix::zeros(n, p);
    for i in 0..n {
        let mean: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let std: Vec<f64> = (0..p).map(|_| 0.05 + rng.random::<f64>()).collect();
        for j in 0..p {
            // Heavier-than-Gaussian residuals: scaled uniform cubed.
            let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
            truths.set(i, j, mean[j] + 3.0 * u * u * u * std[j]);
        }
        stats.push(EnsembleStats { samples: None, mean, std, n_c: 10 });
    }
    (stats, truths)
}

#[test]
fn calibration_set_self_coverage_is_at_least_k_of_n() {
    let (stats, truths) = synthetic_stats(777, 60, 12);
    let (calib, _) = calibrate(&stats, &truths, 0.05, 1.0, 0.0).unwrap();
    let k = cmco::uq::conformal_rank(60, 0.05).unwrap();
    for j in 0..12 {
        let mut satisfied = 0;
        for (i, st) in stats.iter().enumerate() {
            let resid = (truths.get(i, j) - st.mean[j]).abs();
            if resid <= calib.q[j] * st.std[j] {
                satisfied += 1;
            }
        }
        assert!(
            satisfied >= k,
            "location {j}: only {satisfied} of 60 residuals within q*sigma (need {k})"
        );
    }
}

#[test]
fn decreasing_alpha_never_shrinks_quantiles() {
    // alpha = 0.01 needs n >= 99, so use a size feasible for every level.
    let (stats, truths) = synthetic_stats(778, 120, 9);
    let (loose, _) = calibrate(&stats, &truths, 0.10, 1.0, 1e-8).unwrap();
    let (tight, _) = calibrate(&stats, &truths, 0.05, 1.0, 1e-8).unwrap();
    let (tighter, _) = calibrate(&stats, &truths, 0.01, 1.0, 1e-8).unwrap();
    for j in 0..9 {
        assert!(tight.q[j] >= loose.q[j]);
        assert!(tighter.q[j] >= tight.q[j]);
    }
}

#[test]
fn wider_multiplier_intervals_nest() {
    let (stats, truths) = synthetic_stats(779, 40, 7);
    let (mut calib, _) = calibrate(&stats, &truths, 0.05, 1.0, 1e-8).unwrap();
    let test_stats = &stats[0];
    let (lo1, hi1) = build_intervals(test_stats, &calib).unwrap();
    calib.z = 1.96;
    let (lo2, hi2) = build_intervals(test_stats, &calib).unwrap();
    for j in 0..7 {
        assert!(lo2[j] <= lo1[j] && hi1[j] <= hi2[j]);
    }
}

#[test]
fn mc_predict_moments_match_recomputation_from_retained_samples() {
    let model = build_model(
        BranchConfig {
            kind: BranchKind::Gru,
            input_channels: 1,
            hidden: 8,
            layers: 2,
            dropout: 0.2,
            layer_norm: true,
        },
        TrunkConfig { widths: vec![1, 12, 8], activation: Activation::Tanh, dropout: 0.2 },
        RngStream::new(42, 0),
    )
    .unwrap();
    let u = Matrix::from_vec(6, 1, vec![0.1, 0.4, -0.3, 0.8, 0.2, -0.5]).unwrap();
    let grid = QueryGrid::new(Matrix::from_rows(&[vec![0.1], vec![0.5], vec![0.9]]));
    let stats = mc_predict(&model, &u, &grid, 10, 99, true).unwrap();
    let samples = stats.samples.as_ref().unwrap();
    assert_eq!(samples.rows(), 10);

    // Independent recomputation straight from the definitions.
    for j in 0..3 {
        let mut mean = 0.0;
        for k in 0..10 {
            mean += samples.get(k, j);
        }
        mean /= 10.0;
        let mut var = 0.0;
        for k in 0..10 {
            var += (mean - samples.get(k, j)).powi(2);
        }
        let std = (var / 10.0).sqrt();
        assert!((stats.mean[j] - mean).abs() < 1e-12);
        assert!((stats.std[j] - std).abs() < 1e-12);
        assert!(stats.std[j] > 0.0, "dropout must give spread");
    }
}

#[test]
fn zero_dropout_model_has_identical_passes_and_zero_spread() {
    let model = build_model(
        BranchConfig {
            kind: BranchKind::Gru,
            input_channels: 1,
            hidden: 5,
            layers: 1,
            dropout: 0.0,
            layer_norm: true,
        },
        TrunkConfig { widths: vec![1, 6, 5], activation: Activation::Tanh, dropout: 0.0 },
        RngStream::new(7, 0),
    )
    .unwrap();
    let u = Matrix::from_vec(4, 1, vec![0.3, -0.2, 0.9, 0.0]).unwrap();
    let grid = QueryGrid::new(Matrix::from_rows(&[vec![0.25], vec![0.75]]));
    let stats = mc_predict(&model, &u, &grid, 5, 3, true).unwrap();
    let samples = stats.samples.unwrap();
    for k in 1..5 {
        assert_eq!(samples.row(k), samples.row(0));
    }
    assert_eq!(stats.std, vec![0.0, 0.0]);
}

#[test]
fn scores_from_floored_sigma_remain_finite() {
    let stats = vec![EnsembleStats {
        samples: None,
        mean: vec![1.0],
        std: vec![0.0],
        n_c: 10,
    }];
    let truths = Matrix::from_rows(&[vec![2.0]]);
    let scores = nonconformity_scores(&stats, &truths, 1e-8).unwrap();
    assert_eq!(scores.get(0, 0), 1e8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_agrees_with_oracle_on_random_vectors(
        n in 19usize..200,
        alpha_millis in prop::sample::select(vec![10u64, 50, 100]),
        seed in 0u64..1000,
    ) {
        let mut rng = RngStream::new(seed, 1).rng();
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 100.0).collect();
        let alpha = alpha_millis as f64 / 1000.0;
        match quantile_oracle(&scores, alpha_millis) {
            Some(expected) => prop_assert_eq!(conformal_quantile(&scores, alpha).unwrap(), expected),
            None => prop_assert!(conformal_quantile(&scores, alpha).is_err()),
        }
    }

    #[test]
    fn intervals_are_ordered_and_identity_holds(
        seed in 0u64..500,
        p in 1usize..40,
    ) {
        let mut rng = RngStream::new(seed, 2).rng();
        let mean: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let std: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let q: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 3.0).collect();
        let truth: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let calib = ConformalCalibration {
            q, alpha: 0.05, z: 1.96, n_c: 10, n_cal: 30, sigma_floor: 1e-8,
        };
        let stats = EnsembleStats { samples: None, mean, std, n_c: 10 };
        let (lower, upper) = build_intervals(&stats, &calib).unwrap();
        for j in 0..p {
            prop_assert!(lower[j] <= upper[j]);
        }
        let c = empirical_coverage(&truth, &lower, &upper).unwrap();
        let f = failure_rate(&truth, &lower, &upper).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert_eq!(f + 100.0 * c, 100.0);
    }

    #[test]
    fn reduce_passes_matches_two_pass_definition(
        seed in 0u64..500,
        n_c in 2usize..12,
        p in 1usize..20,
    ) {
        let mut rng = RngStream::new(seed, 3).rng();
        let mut samples = Matrix::zeros(n_c, p);
        for k in 0..n_c {
            for j in 0..p {
                samples.set(k, j, rng.random::<f64>() * 20.0 - 10.0);
            }
        }
        let (mean, std) = reduce_passes(&samples);
        for j in 0..p {
            let m: f64 = (0..n_c).map(|k| samples.get(k, j)).sum::<f64>() / n_c as f64;
            let v: f64 = (0..n_c).map(|k| (m - samples.get(k, j)).powi(2)).sum::<f64>() / n_c as f64;
            prop_assert!((mean[j] - m).abs() < 1e-12);
            prop_assert!((std[j] - v.sqrt()).abs() < 1e-12);
        }
    }
}
