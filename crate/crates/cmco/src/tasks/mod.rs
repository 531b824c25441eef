//! Synthetic, oracle-solvable dataset generators and dataset splitting.

pub mod antiderivative;
pub mod container;
pub mod heat1d;
pub mod proxy_field;
pub mod spec;
pub mod split;

pub use antiderivative::{antiderivative_field, gen_antiderivative, uniform_points, FourierSeries};
pub use container::{load_dataset, save_dataset, DatasetManifest, DATASET_FORMAT_VERSION};
pub use heat1d::{gen_heat1d, heat1d_solve, interp_linear, HeatParams};
pub use proxy_field::{gen_proxy_field, gen_proxy_field_with_latents, lattice_grid, proxy_field_values};
pub use spec::{TaskKind, TaskSpec};
pub use split::{split_dataset, SplitSpec};

use crate::data::Dataset;
use crate::error::Result;

/// Dispatch on the task kind.
pub fn generate(spec: &TaskSpec) -> Result<Dataset> {
    match spec.kind {
        TaskKind::Antiderivative { .. } => gen_antiderivative(spec),
        TaskKind::Heat1d { .. } => gen_heat1d(spec),
        TaskKind::ProxyField { .. } => gen_proxy_field(spec),
    }
}
