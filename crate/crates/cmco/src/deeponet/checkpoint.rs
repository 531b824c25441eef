//! Checkpoint persistence: a JSON manifest describing configs, the parameter
//! name/shape list in serialization order, and normalization stats, next to
//! a raw little-endian float32 binary of the concatenated parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::io_util::{ensure_dir, read_f32_bin, read_json, write_f32_bin, write_json};
use crate::nn::rng::RngStream;
use crate::train::norm::NormStats;

use super::config::{BranchConfig, TrunkConfig};
use super::model::{build_model, DeepONetModel};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const PARAMS_BIN: &str = "params.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub branch: BranchConfig,
    pub trunk: TrunkConfig,
    pub params: Vec<ParamDescriptor>,
    pub norm_stats: NormStats,
    pub coord_bounds: Option<Vec<(f64, f64)>>,
}

/// Write `<dir>/manifest.json` and `<dir>/params.bin`.
pub fn save_checkpoint(model: &DeepONetModel, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        branch: model.branch_cfg.clone(),
        trunk: model.trunk_cfg.clone(),
        params: model
            .param_blocks()
            .into_iter()
            .map(|(name, shape)| ParamDescriptor { name, shape })
            .collect(),
        norm_stats: model.norm.clone(),
        coord_bounds: model.coord_bounds.clone(),
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    write_f32_bin(&dir.join(PARAMS_BIN), model.flatten_params().into_iter())
}

/// Load a checkpoint directory back into a model. Parameters are stored in
/// f32, so a save/load round trip quantizes them to f32 precision.
pub fn load_checkpoint(dir: &Path) -> Result<DeepONetModel> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: CheckpointManifest = read_json(&manifest_path)?;
    if manifest.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(CmcoError::Manifest {
            path: manifest_path.display().to_string(),
            detail: format!(
                "format version {} unsupported (expected {})",
                manifest.format_version, CHECKPOINT_FORMAT_VERSION
            ),
        });
    }
    // Seed is irrelevant; every parameter is overwritten below.
    let mut model = build_model(manifest.branch, manifest.trunk, RngStream::new(0, 0))?;
    let expected: Vec<ParamDescriptor> = model
        .param_blocks()
        .into_iter()
        .map(|(name, shape)| ParamDescriptor { name, shape })
        .collect();
    if expected.len() != manifest.params.len()
        || expected
            .iter()
            .zip(&manifest.params)
            .any(|(a, b)| a.name != b.name || a.shape != b.shape)
    {
        return Err(CmcoError::Manifest {
            path: manifest_path.display().to_string(),
            detail: "parameter list does not match the architecture".into(),
        });
    }
    let count = model.parameter_count();
    let flat = read_f32_bin(&dir.join(PARAMS_BIN), count)?;
    model.assign_params(&flat)?;
    model.norm = manifest.norm_stats;
    model.coord_bounds = manifest.coord_bounds;
    Ok(model)
}
