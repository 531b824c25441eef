//! Uncertainty quantification: MC-dropout ensembling, split conformal
//! calibration, interval construction, and coverage diagnostics.

pub mod artifact;
pub mod conformal;
pub mod ensemble;
pub mod metrics;
pub mod report;

pub use artifact::{load_calibration, save_calibration, CalibrationManifest, CALIBRATION_FORMAT_VERSION};
pub use conformal::{
    build_intervals, calibrate, conformal_quantile, conformal_rank, nonconformity_scores,
    CalibrationDiagnostics, ConformalCalibration, DEFAULT_SIGMA_FLOOR, DEFAULT_Z,
};
pub use ensemble::{mc_predict, reduce_passes, EnsembleStats};
pub use metrics::{
    empirical_coverage, failure_rate, flag_outlier, mean_relative_error, relative_l2,
    OutlierThresholds, DEFAULT_REL_ERR_EPS,
};
pub use report::{
    evaluate_sample, read_report_csv, write_report_csv, SampleIntervals, SampleReport,
    REPORT_CSV_HEADER,
};
