//! Branch + trunk operator assembly, forward passes, and checkpointing.

pub mod checkpoint;
pub mod config;
pub mod grad_adapter;
pub mod model;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, CHECKPOINT_FORMAT_VERSION};
pub use config::{closed_form_param_count, BranchConfig, BranchKind, TrunkConfig};
pub use grad_adapter::ModelFragment;
pub use model::{build_model, sequence_major, BatchCache, DeepONetModel, FieldPrediction, RecurrentStack};
