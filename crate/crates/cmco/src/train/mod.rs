//! Supervised training: normalization, MSE, Adam, plateau decay, fit loop.

pub mod adam;
pub mod fit;
pub mod loss;
pub mod norm;
pub mod plateau;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use fit::{attach_normalization, fit, write_history_csv, EpochRecord, TrainConfig};
pub use loss::mse_loss;
pub use norm::{compute_norm_stats, NormFit, NormStats};
pub use plateau::{PlateauConfig, PlateauState};
