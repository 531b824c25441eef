//! Library surface of the pipeline binary; the stages are exposed here so
//! integration tests can drive them directly.

pub mod config;
pub mod stages;
pub mod threads;

pub use config::{Paths, PipelineConfig, UqSettings};
pub use stages::{
    cmd_calibrate, cmd_evaluate, cmd_gen, cmd_report, cmd_train, recompute_summary_from_csv,
    run_pipeline,
};
