//! Per-sample interval reports and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};

use super::conformal::{build_intervals, ConformalCalibration};
use super::ensemble::EnsembleStats;
use super::metrics::{
    empirical_coverage, failure_rate, flag_outlier, mean_relative_error, relative_l2,
    OutlierThresholds,
};

/// One test sample's diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample_id: usize,
    /// Empirical coverage in [0, 1].
    pub coverage: f64,
    pub mean_rel_err_pct: f64,
    pub failure_rate_pct: f64,
    pub outlier: bool,
    pub rel_l2_pct: f64,
}

/// Interval bounds retained for plotting dumps.
#[derive(Debug, Clone)]
pub struct SampleIntervals {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Evaluate one test sample against a calibration.
pub fn evaluate_sample(
    sample_id: usize,
    stats: &EnsembleStats,
    truth: &[f64],
    calib: &ConformalCalibration,
    thresholds: &OutlierThresholds,
    rel_err_eps: f64,
) -> Result<(SampleReport, SampleIntervals)> {
    let (lower, upper) = build_intervals(stats, calib)?;
    let coverage = empirical_coverage(truth, &lower, &upper)?;
    let fail_pct = failure_rate(truth, &lower, &upper)?;
    let err_pct = mean_relative_error(&stats.mean, truth, rel_err_eps)?;
    let report = SampleReport {
        sample_id,
        coverage,
        mean_rel_err_pct: err_pct,
        failure_rate_pct: fail_pct,
        outlier: flag_outlier(fail_pct, err_pct, thresholds),
        rel_l2_pct: relative_l2(&stats.mean, truth)?,
    };
    Ok((report, SampleIntervals { lower, upper }))
}

pub const REPORT_CSV_HEADER: &str =
    "sample_id,coverage,mean_rel_err_pct,failure_rate_pct,outlier_flag,rel_l2_pct";

pub fn write_report_csv(path: &Path, rows: &[SampleReport]) -> Result<()> {
    let mut text = String::from(REPORT_CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.sample_id,
            r.coverage,
            r.mean_rel_err_pct,
            r.failure_rate_pct,
            u8::from(r.outlier),
            r.rel_l2_pct,
        ));
    }
    std::fs::write(path, text).map_err(|e| CmcoError::io(path.display().to_string(), e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<SampleReport>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CmcoError::io(path.display().to_string(), e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != REPORT_CSV_HEADER {
                return Err(CmcoError::Manifest {
                    path: path.display().to_string(),
                    detail: format!("unexpected report header: {line}"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CmcoError::Manifest {
                path: path.display().to_string(),
                detail: format!("row {idx} has {} fields", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| CmcoError::Manifest {
                path: path.display().to_string(),
                detail: format!("bad number {s} in row {idx}"),
            })
        };
        rows.push(SampleReport {
            sample_id: parse(fields[0])? as usize,
            coverage: parse(fields[1])?,
            mean_rel_err_pct: parse(fields[2])?,
            failure_rate_pct: parse(fields[3])?,
            outlier: fields[4] == "1",
            rel_l2_pct: parse(fields[5])?,
        });
    }
    Ok(rows)
}
