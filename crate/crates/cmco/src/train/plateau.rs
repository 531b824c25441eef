//! Plateau learning-rate decay.
//!
//! An epoch "improves" when its loss beats the best seen so far by more than
//! a relative threshold. Once `patience` consecutive non-improving epochs
//! accumulate, the rate is multiplied by `factor` (clamped at `min_lr`) and
//! the counter resets; the best-loss watermark is kept.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub rel_threshold: f64,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.5,
            patience: 10,
            rel_threshold: 1e-4,
            min_lr: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlateauState {
    pub lr: f64,
    config: PlateauConfig,
    best: f64,
    bad_epochs: usize,
}

impl PlateauState {
    pub fn new(initial_lr: f64, config: PlateauConfig) -> Self {
        PlateauState {
            lr: initial_lr,
            config,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Feed one epoch loss; returns the learning rate for the next epoch.
    pub fn step(&mut self, epoch_loss: f64) -> f64 {
        if epoch_loss < self.best * (1.0 - self.config.rel_threshold) {
            self.best = epoch_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.config.patience {
                self.lr = (self.lr * self.config.factor).max(self.config.min_lr);
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}
