//! On-disk dataset container: a directory holding `manifest.json` plus raw
//! little-endian float32 binaries `branch_inputs.bin` (sample-major, each
//! sample row-major `[T x C]`), `coords.bin` (`[P x d]`), and `fields.bin`
//! (`[N x P]`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, QueryGrid, Role};
use crate::error::{CmcoError, Result};
use crate::io_util::{ensure_dir, read_f32_bin, read_json, write_f32_bin, write_json};
use crate::nn::matrix::Matrix;

use super::spec::TaskSpec;

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const INPUTS_BIN: &str = "branch_inputs.bin";
const COORDS_BIN: &str = "coords.bin";
const FIELDS_BIN: &str = "fields.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n: usize,
    pub t_steps: usize,
    pub channels: usize,
    pub query_points: usize,
    pub query_dim: usize,
    pub dtype: String,
    pub endianness: String,
    pub role: Role,
    pub task: TaskSpec,
    pub oracle_tol: f64,
}

pub fn save_dataset(ds: &Dataset, task: &TaskSpec, dir: &Path) -> Result<()> {
    ds.validate()?;
    ensure_dir(dir)?;
    let (t_steps, channels) = ds.seq_shape();
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        n: ds.len(),
        t_steps,
        channels,
        query_points: ds.grid.len(),
        query_dim: ds.grid.dim(),
        dtype: "float32".into(),
        endianness: "little".into(),
        role: ds.role,
        task: task.clone(),
        oracle_tol: task.kind.oracle_tol(),
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    write_f32_bin(
        &dir.join(INPUTS_BIN),
        ds.branch_inputs.iter().flat_map(|m| m.data().iter().copied()),
    )?;
    write_f32_bin(&dir.join(COORDS_BIN), ds.grid.coords.data().iter().copied())?;
    write_f32_bin(&dir.join(FIELDS_BIN), ds.fields.data().iter().copied())
}

pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetManifest)> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: DatasetManifest = read_json(&manifest_path)?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(CmcoError::Manifest {
            path: manifest_path.display().to_string(),
            detail: format!(
                "format version {} unsupported (expected {})",
                manifest.format_version, DATASET_FORMAT_VERSION
            ),
        });
    }
    if manifest.dtype != "float32" || manifest.endianness != "little" {
        return Err(CmcoError::Manifest {
            path: manifest_path.display().to_string(),
            detail: format!(
                "unsupported encoding {}/{}",
                manifest.dtype, manifest.endianness
            ),
        });
    }
    let per_sample = manifest.t_steps * manifest.channels;
    let raw = read_f32_bin(&dir.join(INPUTS_BIN), manifest.n * per_sample)?;
    let branch_inputs: Vec<Matrix> = raw
        .chunks_exact(per_sample)
        .map(|chunk| Matrix::from_vec(manifest.t_steps, manifest.channels, chunk.to_vec()))
        .collect::<Result<_>>()?;
    let coords = Matrix::from_vec(
        manifest.query_points,
        manifest.query_dim,
        read_f32_bin(&dir.join(COORDS_BIN), manifest.query_points * manifest.query_dim)?,
    )?;
    let fields = Matrix::from_vec(
        manifest.n,
        manifest.query_points,
        read_f32_bin(&dir.join(FIELDS_BIN), manifest.n * manifest.query_points)?,
    )?;
    let ds = Dataset {
        branch_inputs,
        grid: QueryGrid::new(coords),
        fields,
        role: manifest.role,
    };
    ds.validate()?;
    Ok((ds, manifest))
}
