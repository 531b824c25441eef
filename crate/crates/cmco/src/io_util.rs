//! Small helpers for the on-disk formats: JSON manifests next to raw
//! little-endian float32 binaries.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CmcoError, Result};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CmcoError::Manifest { path: path.display().to_string(), detail: e.to_string() })?;
    fs::write(path, text.as_bytes()).map_err(|e| CmcoError::io(path.display().to_string(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CmcoError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text)
        .map_err(|e| CmcoError::Manifest { path: path.display().to_string(), detail: e.to_string() })
}

/// Write values as little-endian f32.
pub fn write_f32_bin(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| CmcoError::io(path.display().to_string(), e))
}

/// Read little-endian f32 values, widening to f64. `expected` guards the
/// element count.
pub fn read_f32_bin(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| CmcoError::io(path.display().to_string(), e))?;
    if bytes.len() != expected * 4 {
        return Err(CmcoError::Manifest {
            path: path.display().to_string(),
            detail: format!("expected {} bytes ({} f32 values), found {}", expected * 4, expected, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CmcoError::io(path.display().to_string(), e))
}
