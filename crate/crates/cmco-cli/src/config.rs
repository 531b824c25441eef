//! Pipeline configuration: one JSON file drives every stage; a handful of
//! CLI flags override individual fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cmco::deeponet::{BranchConfig, BranchKind, TrunkConfig};
use cmco::error::{CmcoError, Result};
use cmco::nn::dense::Activation;
use cmco::tasks::{SplitSpec, TaskSpec};
use cmco::train::TrainConfig;
use cmco::uq::{OutlierThresholds, DEFAULT_REL_ERR_EPS, DEFAULT_SIGMA_FLOOR, DEFAULT_Z};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub calibration: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: "out/data".into(),
            checkpoint: "out/checkpoint".into(),
            calibration: "out/calibration".into(),
            report_dir: "out/report".into(),
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_z() -> f64 {
    DEFAULT_Z
}
fn default_passes() -> usize {
    10
}
fn default_sigma_floor() -> f64 {
    DEFAULT_SIGMA_FLOOR
}
fn default_rel_err_eps() -> f64 {
    DEFAULT_REL_ERR_EPS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UqSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Gaussian multiplier on the calibrated half-width.
    #[serde(default = "default_z")]
    pub z: f64,
    /// MC-dropout passes per sample; shared by calibration and evaluation.
    #[serde(default = "default_passes")]
    pub passes: usize,
    #[serde(default = "default_sigma_floor")]
    pub sigma_floor: f64,
    #[serde(default)]
    pub outlier: OutlierThresholds,
    #[serde(default = "default_rel_err_eps")]
    pub rel_err_eps: f64,
}

impl Default for UqSettings {
    fn default() -> Self {
        UqSettings {
            alpha: default_alpha(),
            z: default_z(),
            passes: default_passes(),
            sigma_floor: default_sigma_floor(),
            outlier: OutlierThresholds::default(),
            rel_err_eps: default_rel_err_eps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default = "default_task")]
    pub task: TaskSpec,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default = "default_branch")]
    pub branch: BranchConfig,
    #[serde(default = "default_trunk")]
    pub trunk: TrunkConfig,
    #[serde(default = "default_train")]
    pub train: TrainConfig,
    #[serde(default)]
    pub uq: UqSettings,
}

fn default_task() -> TaskSpec {
    TaskSpec::antiderivative(1000, 64, 256, 0)
}

fn default_split() -> SplitSpec {
    SplitSpec::Fractions(0.6, 0.2, 0.2)
}

fn default_branch() -> BranchConfig {
    BranchConfig {
        kind: BranchKind::Gru,
        input_channels: 1,
        hidden: 32,
        layers: 1,
        dropout: 0.1,
        layer_norm: true,
    }
}

fn default_trunk() -> TrunkConfig {
    TrunkConfig {
        widths: vec![1, 64, 32],
        activation: Activation::Tanh,
        dropout: 0.1,
    }
}

fn default_train() -> TrainConfig {
    TrainConfig {
        learning_rate: 2e-3,
        epochs: 300,
        batch_size: 32,
        ..Default::default()
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            paths: Paths::default(),
            task: default_task(),
            split: default_split(),
            branch: default_branch(),
            trunk: default_trunk(),
            train: default_train(),
            uq: UqSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = cmco::io_util::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Built-in heat-equation preset (same surrogate sizes, heat task).
    pub fn heat1d_preset() -> Self {
        PipelineConfig {
            task: TaskSpec::heat1d(1000, 64, 256, 0),
            ..Default::default()
        }
    }

    /// Built-in proxy-field preset: 7-step, 12-channel readings to a 2-D
    /// field.
    pub fn proxy_preset() -> Self {
        PipelineConfig {
            task: TaskSpec::proxy_field(1000, 256, 0),
            branch: BranchConfig {
                input_channels: 12,
                ..default_branch()
            },
            trunk: TrunkConfig {
                widths: vec![2, 64, 32],
                ..default_trunk()
            },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.branch.validate()?;
        self.trunk.validate()?;
        self.train.validate()?;
        if !(self.uq.alpha > 0.0 && self.uq.alpha < 1.0) {
            return Err(CmcoError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.uq.alpha
            )));
        }
        if self.uq.passes < 2 {
            return Err(CmcoError::InvalidConfig(format!(
                "uq.passes must be >= 2, got {}",
                self.uq.passes
            )));
        }
        if self.uq.sigma_floor < 0.0 {
            return Err(CmcoError::InvalidConfig("sigma_floor must be >= 0".into()));
        }
        if self.branch.input_channels != self.task.channels {
            return Err(CmcoError::InvalidConfig(format!(
                "branch expects {} channels but the task emits {}",
                self.branch.input_channels, self.task.channels
            )));
        }
        Ok(())
    }
}
