//! The supervised training loop: seeded shuffled mini-batches, dropout in
//! training mode, Adam updates, plateau decay. Single-threaded and fully
//! deterministic given (seed, config, data).

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Role};
use crate::deeponet::model::{sequence_major, DeepONetModel};
use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;
use crate::nn::rng::{domains, RngStream};

use super::adam::{AdamHyper, AdamState};
use super::loss::mse_loss;
use super::norm::{compute_norm_stats, NormFit};
use super::plateau::{PlateauConfig, PlateauState};

fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    200
}
fn default_batch() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub adam: AdamHyper,
    #[serde(default)]
    pub plateau: PlateauConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            adam: AdamHyper::default(),
            plateau: PlateauConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(CmcoError::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(CmcoError::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: TrainConfig = crate::io_util::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One loss-history row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
}

/// Fit normalization stats and query-coordinate bounds from the training
/// split and attach both to the model. Must run before [`fit`].
pub fn attach_normalization(model: &mut DeepONetModel, train: &Dataset) -> Result<NormFit> {
    let fit = compute_norm_stats(train)?;
    model.norm = fit.stats.clone();
    model.coord_bounds = Some(train.grid.bounds());
    Ok(fit)
}

/// Train in place; returns the per-epoch loss history. Requires attached
/// normalization stats and a train-role dataset; never touches calibration
/// or test data.
pub fn fit(
    model: &mut DeepONetModel,
    train: &Dataset,
    config: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if train.role != Role::Train {
        return Err(CmcoError::InvalidConfig(format!(
            "fit requires the train split, got role {}",
            train.role.as_str()
        )));
    }
    if model.coord_bounds.is_none() {
        return Err(CmcoError::InvalidConfig(
            "normalization stats not attached; call attach_normalization first".into(),
        ));
    }
    train.validate()?;
    if train.is_empty() {
        return Err(CmcoError::InvalidConfig("empty training split".into()));
    }

    let n = train.len();
    let p = train.grid.len();

    // Normalize the whole split once.
    let inputs_norm: Vec<Matrix> = train
        .branch_inputs
        .iter()
        .map(|u| model.norm.normalize_input(u))
        .collect::<Result<_>>()?;
    let grid_norm = model.normalize_grid(&train.grid);
    let mut targets_norm = train.fields.clone();
    let stats = model.norm.clone();
    targets_norm.map_inplace(|y| stats.normalize_output(y));

    let mut flat = model.flatten_params();
    let mut adam = AdamState::new(flat.len());
    let mut plateau = PlateauState::new(config.learning_rate, config.plateau);
    let mut history = Vec::with_capacity(config.epochs);
    let mut dropout_calls: u64 = 0;

    for epoch in 1..=config.epochs {
        let lr = plateau.lr;
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = RngStream::new(config.seed, domains::SHUFFLE + epoch as u64).rng();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_sq_sum = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let samples: Vec<&Matrix> = batch.iter().map(|&i| &inputs_norm[i]).collect();
            let xs = sequence_major(&samples)?;
            let mut targets = Matrix::zeros(batch.len(), p);
            for (row, &i) in batch.iter().enumerate() {
                targets.row_mut(row).copy_from_slice(targets_norm.row(i));
            }

            let mut rng =
                RngStream::new(config.seed, domains::TRAIN_DROPOUT + dropout_calls).rng();
            dropout_calls += 1;
            let (pred, cache) = model.forward_batch_normalized(&xs, &grid_norm, true, &mut rng)?;
            let (loss, dout) = mse_loss(&pred, &targets)?;
            if !loss.is_finite() {
                return Err(CmcoError::NumericFailure(format!(
                    "non-finite training loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            epoch_sq_sum += loss * batch.len() as f64;

            let grads = model.backward_batch(&cache, &dout)?;
            adam.apply(&mut flat, &grads, lr, &config.adam).map_err(|e| match e {
                CmcoError::NumericFailure(msg) => CmcoError::NumericFailure(format!(
                    "{msg} at epoch {epoch}, batch {batch_idx}"
                )),
                other => other,
            })?;
            model.assign_params(&flat)?;
        }

        let epoch_loss = epoch_sq_sum / n as f64;
        plateau.step(epoch_loss);
        history.push(EpochRecord { epoch, lr, train_loss: epoch_loss });
    }
    Ok(history)
}

/// Loss history as `epoch,lr,train_loss` CSV.
pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut text = String::from("epoch,lr,train_loss\n");
    for rec in history {
        text.push_str(&format!("{},{},{}\n", rec.epoch, rec.lr, rec.train_loss));
    }
    std::fs::write(path, text).map_err(|e| CmcoError::io(path.display().to_string(), e))
}
