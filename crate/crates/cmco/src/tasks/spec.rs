//! Task descriptors for the synthetic sequence-to-field generators.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TaskKind {
    /// `u(t)` on `[0,1]` is a random truncated Fourier series; the field is
    /// the running integral evaluated on the query grid.
    Antiderivative {
        /// Number of Fourier harmonics.
        #[serde(default = "default_modes")]
        modes: usize,
        /// Minimum number of fine-grid trapezoid intervals.
        #[serde(default = "default_fine_intervals")]
        fine_intervals: usize,
    },
    /// 1-D heat equation: the input drives the left boundary temperature;
    /// the field is the temperature profile at the final time.
    Heat1d {
        #[serde(default = "default_length")]
        length: f64,
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(default = "default_t_final")]
        t_final: f64,
        /// Solver nodes including both boundaries.
        #[serde(default = "default_nx")]
        nx: usize,
        /// Target stability ratio `kappa dt / dx^2`; must be <= 0.5.
        #[serde(default = "default_courant")]
        courant: f64,
    },
    /// Multi-channel proxy readings drive a smooth 2-D field through a
    /// scalar latent; the field is closed-form in the latent.
    ProxyField {
        /// Standard deviation of the per-reading sensor noise.
        #[serde(default = "default_noise")]
        noise: f64,
    },
}

fn default_modes() -> usize {
    5
}
fn default_fine_intervals() -> usize {
    20_000
}
fn default_length() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    0.1
}
fn default_t_final() -> f64 {
    1.0
}
fn default_nx() -> usize {
    129
}
fn default_courant() -> f64 {
    0.45
}
fn default_noise() -> f64 {
    0.02
}

impl TaskKind {
    /// Tolerance the generator's field values carry against their
    /// independent oracle, recorded in the dataset manifest.
    pub fn oracle_tol(&self) -> f64 {
        match self {
            TaskKind::Antiderivative { .. } => 1e-6,
            TaskKind::Heat1d { .. } => 1e-2,
            TaskKind::ProxyField { .. } => 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub n_samples: usize,
    pub t_steps: usize,
    pub channels: usize,
    pub query_points: usize,
    pub seed: u64,
}

impl TaskSpec {
    pub fn antiderivative(n: usize, t: usize, p: usize, seed: u64) -> Self {
        TaskSpec {
            kind: TaskKind::Antiderivative {
                modes: default_modes(),
                fine_intervals: default_fine_intervals(),
            },
            n_samples: n,
            t_steps: t,
            channels: 1,
            query_points: p,
            seed,
        }
    }

    pub fn heat1d(n: usize, t: usize, p: usize, seed: u64) -> Self {
        TaskSpec {
            kind: TaskKind::Heat1d {
                length: default_length(),
                kappa: default_kappa(),
                t_final: default_t_final(),
                nx: default_nx(),
                courant: default_courant(),
            },
            n_samples: n,
            t_steps: t,
            channels: 1,
            query_points: p,
            seed,
        }
    }

    pub fn proxy_field(n: usize, p: usize, seed: u64) -> Self {
        TaskSpec {
            kind: TaskKind::ProxyField { noise: default_noise() },
            n_samples: n,
            t_steps: 7,
            channels: 12,
            query_points: p,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 || self.t_steps < 1 || self.query_points < 1 || self.channels < 1 {
            return Err(CmcoError::InvalidConfig(format!(
                "task sizes must be >= 1 (N={}, T={}, P={}, C={})",
                self.n_samples, self.t_steps, self.query_points, self.channels
            )));
        }
        match &self.kind {
            TaskKind::Antiderivative { fine_intervals, .. } => {
                if self.channels != 1 {
                    return Err(CmcoError::InvalidConfig(
                        "antiderivative task is single-channel".into(),
                    ));
                }
                if *fine_intervals < 2 {
                    return Err(CmcoError::InvalidConfig("fine_intervals must be >= 2".into()));
                }
            }
            TaskKind::Heat1d { length, kappa, t_final, nx, courant } => {
                if self.channels != 1 {
                    return Err(CmcoError::InvalidConfig("heat1d task is single-channel".into()));
                }
                if *length <= 0.0 || *kappa <= 0.0 || *t_final <= 0.0 {
                    return Err(CmcoError::InvalidConfig(
                        "heat1d needs positive length, kappa, t_final".into(),
                    ));
                }
                if *nx < 3 {
                    return Err(CmcoError::InvalidConfig("heat1d needs nx >= 3".into()));
                }
                if *courant <= 0.0 || *courant > 0.5 {
                    return Err(CmcoError::InvalidConfig(format!(
                        "explicit scheme unstable: r = {courant} violates r <= 0.5"
                    )));
                }
            }
            TaskKind::ProxyField { noise } => {
                if *noise < 0.0 {
                    return Err(CmcoError::InvalidConfig("noise must be >= 0".into()));
                }
            }
        }
        Ok(())
    }
}
