//! Z-score normalization fitted on the training split only.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Role};
use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

/// Standard deviations are floored here so constant channels stay usable.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    /// Per input channel, over all samples and time steps.
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    /// Over all field values.
    pub output_mean: f64,
    pub output_std: f64,
}

impl NormStats {
    /// Identity stats; a freshly built model carries these until fitted.
    pub fn identity(channels: usize) -> Self {
        NormStats {
            input_mean: vec![0.0; channels],
            input_std: vec![1.0; channels],
            output_mean: 0.0,
            output_std: 1.0,
        }
    }

    pub fn normalize_input(&self, u: &Matrix) -> Result<Matrix> {
        if u.cols() != self.input_mean.len() {
            return Err(CmcoError::shape(
                "normalize_input",
                format!("{} channels vs stats {}", u.cols(), self.input_mean.len()),
            ));
        }
        let mut out = u.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.input_mean[c]) / self.input_std[c];
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn normalize_output(&self, y: f64) -> f64 {
        (y - self.output_mean) / self.output_std
    }

    #[inline]
    pub fn denormalize_output(&self, y: f64) -> f64 {
        y * self.output_std + self.output_mean
    }
}

/// Outcome of fitting, carrying warnings about degenerate channels.
#[derive(Debug, Clone)]
pub struct NormFit {
    pub stats: NormStats,
    /// Channels whose std hit the floor (constant channels). Index
    /// `input_mean.len()` stands for the output.
    pub floored: Vec<usize>,
}

/// Compute z-score stats from the training split. Rejects other roles so
/// calibration and test data can never leak into normalization.
pub fn compute_norm_stats(train: &Dataset) -> Result<NormFit> {
    if train.role != Role::Train {
        return Err(CmcoError::InvalidConfig(format!(
            "norm stats must come from the train split, got role {}",
            train.role.as_str()
        )));
    }
    if train.is_empty() {
        return Err(CmcoError::InvalidConfig("empty training split".into()));
    }
    let (_, channels) = train.seq_shape();
    let mut count = 0usize;
    let mut mean = vec![0.0; channels];
    for u in &train.branch_inputs {
        for i in 0..u.rows() {
            for (c, &v) in u.row(i).iter().enumerate() {
                mean[c] += v;
            }
        }
        count += u.rows();
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0; channels];
    for u in &train.branch_inputs {
        for i in 0..u.rows() {
            for (c, &v) in u.row(i).iter().enumerate() {
                var[c] += (v - mean[c]) * (v - mean[c]);
            }
        }
    }
    let mut floored = Vec::new();
    let std: Vec<f64> = var
        .iter()
        .enumerate()
        .map(|(c, &v)| {
            let s = (v / count as f64).sqrt();
            if s < STD_FLOOR {
                floored.push(c);
                STD_FLOOR
            } else {
                s
            }
        })
        .collect();

    let field_data = train.fields.data();
    let n_out = field_data.len() as f64;
    let out_mean = field_data.iter().sum::<f64>() / n_out;
    let out_var = field_data.iter().map(|v| (v - out_mean) * (v - out_mean)).sum::<f64>() / n_out;
    let mut out_std = out_var.sqrt();
    if out_std < STD_FLOOR {
        floored.push(channels);
        out_std = STD_FLOOR;
    }

    Ok(NormFit {
        stats: NormStats {
            input_mean: mean,
            input_std: std,
            output_mean: out_mean,
            output_std: out_std,
        },
        floored,
    })
}
