//! Calibration artifact persistence: a provenance manifest next to the
//! float32 quantile vector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::io_util::{ensure_dir, read_f32_bin, read_json, write_f32_bin, write_json};

use super::conformal::ConformalCalibration;

pub const CALIBRATION_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const Q_BIN: &str = "q.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationManifest {
    pub format_version: u32,
    pub alpha: f64,
    pub z: f64,
    pub n_c: usize,
    pub n_cal: usize,
    pub sigma_floor: f64,
    pub query_points: usize,
}

pub fn save_calibration(calib: &ConformalCalibration, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let manifest = CalibrationManifest {
        format_version: CALIBRATION_FORMAT_VERSION,
        alpha: calib.alpha,
        z: calib.z,
        n_c: calib.n_c,
        n_cal: calib.n_cal,
        sigma_floor: calib.sigma_floor,
        query_points: calib.q.len(),
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    write_f32_bin(&dir.join(Q_BIN), calib.q.iter().copied())
}

pub fn load_calibration(dir: &Path) -> Result<ConformalCalibration> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: CalibrationManifest = read_json(&manifest_path)?;
    if manifest.format_version != CALIBRATION_FORMAT_VERSION {
        return Err(CmcoError::Manifest {
            path: manifest_path.display().to_string(),
            detail: format!(
                "format version {} unsupported (expected {})",
                manifest.format_version, CALIBRATION_FORMAT_VERSION
            ),
        });
    }
    let q = read_f32_bin(&dir.join(Q_BIN), manifest.query_points)?;
    Ok(ConformalCalibration {
        q,
        alpha: manifest.alpha,
        z: manifest.z,
        n_c: manifest.n_c,
        n_cal: manifest.n_cal,
        sigma_floor: manifest.sigma_floor,
    })
}
