//! Per-sample interval diagnostics: empirical coverage, mean relative
//! error, failure rate, and critical-outlier flagging.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};

pub const DEFAULT_REL_ERR_EPS: f64 = 1e-8;

/// Thresholds for flagging samples that are simultaneously inaccurate and
/// overconfident.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OutlierThresholds {
    pub failure_rate_pct: f64,
    pub mean_rel_err_pct: f64,
}

impl Default for OutlierThresholds {
    fn default() -> Self {
        OutlierThresholds { failure_rate_pct: 10.0, mean_rel_err_pct: 20.0 }
    }
}

fn check_lengths(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(CmcoError::shape(op, format!("lengths {a} vs {b}")));
    }
    Ok(())
}

/// Fraction of locations whose closed interval contains the truth.
pub fn empirical_coverage(y: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_lengths("empirical_coverage", y.len(), lower.len())?;
    check_lengths("empirical_coverage", y.len(), upper.len())?;
    if y.is_empty() {
        return Err(CmcoError::shape("empirical_coverage", "empty field"));
    }
    let inside = y
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(v, (lo, hi))| **lo <= **v && **v <= **hi)
        .count();
    Ok(inside as f64 / y.len() as f64)
}

/// Percentage of locations outside the interval. Computed as
/// `100 - 100 * coverage` so the complement identity
/// `F + 100 C = 100` holds exactly in floating point.
pub fn failure_rate(y: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    Ok(100.0 - 100.0 * empirical_coverage(y, lower, upper)?)
}

/// `(1/P) sum_j |(mu_j - y_j) / (y_j + eps)| * 100`.
pub fn mean_relative_error(mu: &[f64], y: &[f64], eps: f64) -> Result<f64> {
    check_lengths("mean_relative_error", mu.len(), y.len())?;
    if y.is_empty() {
        return Err(CmcoError::shape("mean_relative_error", "empty field"));
    }
    let total: f64 = mu
        .iter()
        .zip(y)
        .map(|(&m, &t)| ((m - t) / (t + eps)).abs())
        .sum();
    Ok(total / y.len() as f64 * 100.0)
}

/// Relative L2 error `||mu - y|| / ||y||` as a percentage.
pub fn relative_l2(mu: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths("relative_l2", mu.len(), y.len())?;
    let num: f64 = mu.iter().zip(y).map(|(&m, &t)| (m - t) * (m - t)).sum();
    let denom: f64 = y.iter().map(|&t| t * t).sum();
    if denom == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / denom).sqrt() * 100.0)
}

/// A sample is a critical outlier when it both fails often and errs badly.
pub fn flag_outlier(
    failure_rate_pct: f64,
    mean_rel_err_pct: f64,
    thresholds: &OutlierThresholds,
) -> bool {
    failure_rate_pct > thresholds.failure_rate_pct
        && mean_rel_err_pct > thresholds.mean_rel_err_pct
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_limits() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(empirical_coverage(&y, &[0.0; 3], &[5.0; 3]).unwrap(), 1.0);
        assert_eq!(empirical_coverage(&y, &[10.0; 3], &[20.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn coverage_counts_boundaries_as_covered() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let lower = [1.0, 0.0, 3.5, 0.0];
        let upper = [1.0, 1.5, 4.0, 4.0];
        // In: j=0 (degenerate interval, boundary hit), j=3 (upper boundary).
        assert_eq!(empirical_coverage(&y, &lower, &upper).unwrap(), 0.5);
    }

    #[test]
    fn three_of_four_inside_gives_three_quarters() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let lower = [0.0, 0.0, 0.0, 10.0];
        let upper = [5.0, 5.0, 5.0, 11.0];
        assert_eq!(empirical_coverage(&y, &lower, &upper).unwrap(), 0.75);
        assert_eq!(failure_rate(&y, &lower, &upper).unwrap(), 25.0);
    }

    #[test]
    fn complement_identity_is_exact_for_awkward_ratios() {
        for p in 1..=64usize {
            for inside in 0..=p {
                let y: Vec<f64> = (0..p).map(|j| j as f64).collect();
                let lower: Vec<f64> = (0..p)
                    .map(|j| if j < inside { -1.0 } else { j as f64 + 1.0 })
                    .collect();
                let upper: Vec<f64> = (0..p)
                    .map(|j| if j < inside { p as f64 + 1.0 } else { j as f64 + 2.0 })
                    .collect();
                let c = empirical_coverage(&y, &lower, &upper).unwrap();
                let f = failure_rate(&y, &lower, &upper).unwrap();
                assert_eq!(f + 100.0 * c, 100.0, "p={p} inside={inside}");
            }
        }
    }

    #[test]
    fn relative_error_limits_and_ratio_identity() {
        let y = [2.0, 4.0, 8.0];
        assert_eq!(mean_relative_error(&y, &y, 0.0).unwrap(), 0.0);
        let mu: Vec<f64> = y.iter().map(|v| v * 1.1).collect();
        let err = mean_relative_error(&mu, &y, 0.0).unwrap();
        assert!((err - 10.0).abs() < 1e-9, "{err}");
    }

    #[test]
    fn zero_truth_is_finite_with_eps() {
        let mu = [1.0, 0.5];
        let y = [0.0, 1.0];
        let eps = 1e-8;
        let err = mean_relative_error(&mu, &y, eps).unwrap();
        let by_hand = (((1.0 - 0.0) / (0.0 + eps)).abs() + ((0.5 - 1.0f64) / (1.0 + eps)).abs()) / 2.0 * 100.0;
        assert!((err - by_hand).abs() < 1e-6 * by_hand);
        assert!(err.is_finite());
    }

    #[test]
    fn outlier_needs_both_conditions() {
        let th = OutlierThresholds::default();
        assert!(flag_outlier(12.0, 25.0, &th));
        assert!(!flag_outlier(12.0, 5.0, &th));
        assert!(!flag_outlier(0.0, 45.0, &th));
        assert!(!flag_outlier(10.0, 20.0, &th), "thresholds are strict");
    }
}
