//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CmcoError>;

#[derive(Debug, Error)]
pub enum CmcoError {
    /// Array shapes do not conform for the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// A configuration value violates its invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A forward, backward, or training step produced a non-finite value.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// The calibration set is too small for the requested miscoverage level.
    #[error(
        "infeasible calibration: n_cal = {n_cal} cannot support alpha = {alpha} \
         (ceil((1-alpha)(n+1)) = {k} > n; minimum n is {min_n})"
    )]
    InfeasibleCalibration {
        n_cal: usize,
        alpha: f64,
        k: usize,
        min_n: usize,
    },

    /// A stored artifact disagrees with the settings it is being used under.
    #[error("provenance mismatch: {0}")]
    ProvenanceMismatch(String),

    /// Gradient check found parameters exceeding the tolerance.
    #[error("gradient check failed: {0}")]
    GradCheckFailure(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error in {path}: {detail}")]
    Manifest { path: String, detail: String },
}

impl CmcoError {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        CmcoError::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CmcoError::Io {
            path: path.into(),
            source,
        }
    }
}
