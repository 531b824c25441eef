//! Split conformal calibration on normalized residuals.
//!
//! Per output location `j`, calibration samples contribute scores
//! `e_ij = |y_ij - mu_j(u_i)| / max(sigma_j(u_i), sigma_floor)`, and the
//! location quantile is the `k`-th smallest score with
//! `k = ceil((1 - alpha)(n + 1))`. Intervals then read
//! `mu -+ z * q * sigma`, with the same floor applied to `sigma`, so a
//! floored location degrades gracefully to absolute-residual calibration.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

use super::ensemble::EnsembleStats;

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-8;
pub const DEFAULT_Z: f64 = 1.96;

/// Per-location quantiles plus the settings they were computed under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalCalibration {
    pub q: Vec<f64>,
    pub alpha: f64,
    pub z: f64,
    pub n_c: usize,
    pub n_cal: usize,
    pub sigma_floor: f64,
}

impl ConformalCalibration {
    /// Refuse to be used under settings other than those calibrated for.
    pub fn check_provenance(&self, alpha: f64, z: f64, n_c: usize) -> Result<()> {
        if self.alpha != alpha || self.z != z || self.n_c != n_c {
            return Err(CmcoError::ProvenanceMismatch(format!(
                "calibration was computed under (alpha={}, z={}, n_c={}) but is being \
                 used under (alpha={alpha}, z={z}, n_c={n_c})",
                self.alpha, self.z, self.n_c
            )));
        }
        Ok(())
    }
}

/// Rank `k = ceil((1-alpha)(n+1))`, computed so that levels that are exact
/// integers in real arithmetic are not pushed up by float representation
/// error (e.g. alpha = 0.1, n = 9 must give k = 9, not 10).
pub fn conformal_rank(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CmcoError::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let k = robust_ceil((1.0 - alpha) * (n as f64 + 1.0));
    if k > n {
        // Smallest feasible n solves (1-alpha)(n+1) <= n, i.e. n >= (1-alpha)/alpha.
        let min_n = robust_ceil((1.0 - alpha) / alpha);
        return Err(CmcoError::InfeasibleCalibration { n_cal: n, alpha, k, min_n });
    }
    Ok(k)
}

/// Ceil with a relative tolerance against representation error.
fn robust_ceil(t: f64) -> usize {
    let nearest = t.round();
    if (t - nearest).abs() < 1e-9 * t.abs().max(1.0) {
        nearest as usize
    } else {
        t.ceil() as usize
    }
}

/// The `(1 - alpha)` conformal quantile of one location's scores: the k-th
/// smallest order statistic. Uses quickselect; the tests compare against a
/// full-sort oracle.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    let k = conformal_rank(scores.len(), alpha)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(CmcoError::NumericFailure(
            "NaN nonconformity score in calibration".into(),
        ));
    }
    let mut work = scores.to_vec();
    let (_, kth, _) = work.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Normalized nonconformity scores `|y - mu| / max(sigma, floor)` for a
/// calibration batch; row i is sample i. With the floor disabled (0) a zero
/// spread yields +inf for a nonzero residual and 0 for a zero residual.
pub fn nonconformity_scores(
    cal_stats: &[EnsembleStats],
    cal_truths: &Matrix,
    sigma_floor: f64,
) -> Result<Matrix> {
    let n = cal_stats.len();
    if cal_truths.rows() != n {
        return Err(CmcoError::shape(
            "nonconformity_scores",
            format!("{} stats vs {} truth rows", n, cal_truths.rows()),
        ));
    }
    let p = cal_truths.cols();
    let mut scores = Matrix::zeros(n, p);
    for (i, stats) in cal_stats.iter().enumerate() {
        if stats.mean.len() != p {
            return Err(CmcoError::shape(
                "nonconformity_scores",
                format!("stats {} has {} locations, truths have {p}", i, stats.mean.len()),
            ));
        }
        let truth = cal_truths.row(i);
        let row = scores.row_mut(i);
        for j in 0..p {
            let num = (truth[j] - stats.mean[j]).abs();
            let denom = stats.std[j].max(sigma_floor);
            row[j] = if denom == 0.0 {
                if num == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                num / denom
            };
        }
    }
    Ok(scores)
}

/// Diagnostics emitted alongside a calibration artifact.
#[derive(Debug, Clone)]
pub struct CalibrationDiagnostics {
    /// Fraction of (sample, location) std values at or below the floor.
    pub floored_fraction: f64,
}

/// Full calibration: scores per location, then the order-statistic quantile
/// per location. All ensembles must share one `n_c` (the score distribution
/// has to be exchangeable with the test-time ensembling).
pub fn calibrate(
    cal_stats: &[EnsembleStats],
    cal_truths: &Matrix,
    alpha: f64,
    z: f64,
    sigma_floor: f64,
) -> Result<(ConformalCalibration, CalibrationDiagnostics)> {
    let n = cal_stats.len();
    conformal_rank(n, alpha)?; // feasibility gate before any work
    let n_c = cal_stats.first().map(|s| s.n_c).unwrap_or(0);
    if cal_stats.iter().any(|s| s.n_c != n_c) {
        return Err(CmcoError::InvalidConfig(
            "mixed ensemble sizes in calibration set".into(),
        ));
    }
    let scores = nonconformity_scores(cal_stats, cal_truths, sigma_floor)?;
    let p = cal_truths.cols();
    let mut q = Vec::with_capacity(p);
    let mut column = vec![0.0; n];
    for j in 0..p {
        for i in 0..n {
            column[i] = scores.get(i, j);
        }
        q.push(conformal_quantile(&column, alpha)?);
    }
    let floored = cal_stats
        .iter()
        .flat_map(|s| s.std.iter())
        .filter(|&&s| s <= sigma_floor)
        .count();
    let diagnostics = CalibrationDiagnostics {
        floored_fraction: floored as f64 / (n * p) as f64,
    };
    Ok((
        ConformalCalibration { q, alpha, z, n_c, n_cal: n, sigma_floor },
        diagnostics,
    ))
}

/// Elementwise interval `mu -+ z * q * max(sigma, floor)`.
pub fn build_intervals(
    test_stats: &EnsembleStats,
    calib: &ConformalCalibration,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = calib.q.len();
    if test_stats.mean.len() != p {
        return Err(CmcoError::shape(
            "build_intervals",
            format!("stats have {} locations, calibration has {p}", test_stats.mean.len()),
        ));
    }
    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    for j in 0..p {
        let sigma = test_stats.std[j].max(calib.sigma_floor);
        let half = calib.z * calib.q[j] * sigma;
        lower.push(test_stats.mean[j] - half);
        upper.push(test_stats.mean[j] + half);
    }
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: Vec<f64>, std: Vec<f64>) -> EnsembleStats {
        EnsembleStats { samples: None, n_c: 10, mean, std }
    }

    #[test]
    fn rank_hits_the_analytic_cases() {
        assert_eq!(conformal_rank(19, 0.05).unwrap(), 19);
        assert_eq!(conformal_rank(99, 0.05).unwrap(), 95);
        assert_eq!(conformal_rank(9, 0.1).unwrap(), 9, "exact-integer level");
        assert!(matches!(
            conformal_rank(10, 0.05),
            Err(CmcoError::InfeasibleCalibration { k: 11, min_n: 19, .. })
        ));
        assert!(matches!(
            conformal_rank(18, 0.05),
            Err(CmcoError::InfeasibleCalibration { .. })
        ));
    }

    #[test]
    fn quantile_is_the_kth_smallest() {
        // n = 19, alpha = 0.05: k = 19, the maximum.
        let scores: Vec<f64> = (1..=19).map(|v| v as f64 * 0.5).collect();
        assert_eq!(conformal_quantile(&scores, 0.05).unwrap(), 9.5);

        // {1..99}: k = ceil(0.95 * 100) = 95.
        let scores: Vec<f64> = (1..=99).map(|v| v as f64).collect();
        assert_eq!(conformal_quantile(&scores, 0.05).unwrap(), 95.0);
    }

    #[test]
    fn scores_are_normalized_absolute_residuals() {
        let st = vec![stats(vec![1.0, 2.0], vec![0.5, 0.0])];
        let truths = Matrix::from_rows(&[vec![3.0, 2.0]]);
        let s = nonconformity_scores(&st, &truths, 1e-8).unwrap();
        assert_eq!(s.get(0, 0), 4.0); // |3-1| / 0.5
        assert_eq!(s.get(0, 1), 0.0); // exact hit

        let truths = Matrix::from_rows(&[vec![3.0, 3.0]]);
        let s = nonconformity_scores(&st, &truths, 1e-8).unwrap();
        assert_eq!(s.get(0, 1), 1e8); // floored denominator
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let st = vec![stats(vec![1.0, -2.0], vec![0.3, 0.7])];
        let truths = Matrix::from_rows(&[vec![1.0, -2.0]]);
        let s = nonconformity_scores(&st, &truths, 1e-8).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interval_construction_matches_hand_arithmetic() {
        let calib = ConformalCalibration {
            q: vec![2.0],
            alpha: 0.05,
            z: 1.96,
            n_c: 10,
            n_cal: 100,
            sigma_floor: 0.0,
        };
        let (lo, hi) = build_intervals(&stats(vec![1.0], vec![0.5]), &calib).unwrap();
        assert!((lo[0] + 0.96).abs() < 1e-12);
        assert!((hi[0] - 2.96).abs() < 1e-12);
    }

    #[test]
    fn zero_spread_with_inactive_floor_degenerates_to_a_point() {
        let calib = ConformalCalibration {
            q: vec![3.0],
            alpha: 0.05,
            z: 1.96,
            n_c: 10,
            n_cal: 100,
            sigma_floor: 0.0,
        };
        let (lo, hi) = build_intervals(&stats(vec![1.3], vec![0.0]), &calib).unwrap();
        assert_eq!(lo, vec![1.3]);
        assert_eq!(hi, vec![1.3]);
    }

    #[test]
    fn half_widths_scale_linearly_in_z() {
        let mk = |z: f64| ConformalCalibration {
            q: vec![1.7, 0.4],
            alpha: 0.05,
            z,
            n_c: 10,
            n_cal: 50,
            sigma_floor: 1e-8,
        };
        let st = stats(vec![0.2, -1.0], vec![0.9, 0.1]);
        let (lo1, hi1) = build_intervals(&st, &mk(1.0)).unwrap();
        let (lo2, hi2) = build_intervals(&st, &mk(1.96)).unwrap();
        for j in 0..2 {
            let w1 = hi1[j] - lo1[j];
            let w2 = hi2[j] - lo2[j];
            assert!((w2 / w1 - 1.96).abs() < 1e-12);
        }
    }

    #[test]
    fn provenance_mismatch_is_refused() {
        let calib = ConformalCalibration {
            q: vec![1.0],
            alpha: 0.05,
            z: 1.96,
            n_c: 10,
            n_cal: 50,
            sigma_floor: 1e-8,
        };
        assert!(calib.check_provenance(0.05, 1.96, 10).is_ok());
        assert!(calib.check_provenance(0.1, 1.96, 10).is_err());
        assert!(calib.check_provenance(0.05, 1.0, 10).is_err());
        assert!(calib.check_provenance(0.05, 1.96, 20).is_err());
    }
}
