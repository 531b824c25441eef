//! MC-dropout ensembling: repeated stochastic forward passes of a trained
//! model with dropout kept active, reduced to a per-location mean and a
//! population standard deviation:
//!
//! ```text
//! mu_j    = (1/n_c) sum_k  yhat_k,j
//! sigma_j = sqrt( (1/n_c) sum_k (mu_j - yhat_k,j)^2 )
//! ```
//!
//! Pass `k` draws its dropout masks from stream id `MC_PASS + k` under the
//! caller's base seed, so passes are independent, reproducible, and
//! reducible in index order regardless of scheduling.

use crate::data::QueryGrid;
use crate::deeponet::model::DeepONetModel;
use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;
use crate::nn::rng::{domains, RngStream};

/// Per-location ensemble statistics, in physical units.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    /// `[n_c x P]` raw pass outputs when retained.
    pub samples: Option<Matrix>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n_c: usize,
}

/// Reduce stacked pass outputs `[n_c x P]` to mean and population std.
pub fn reduce_passes(samples: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n_c = samples.rows();
    let p = samples.cols();
    let mut mean = vec![0.0; p];
    for k in 0..n_c {
        for (m, &v) in mean.iter_mut().zip(samples.row(k)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_c as f64;
    }
    let mut var = vec![0.0; p];
    for k in 0..n_c {
        for (j, &v) in samples.row(k).iter().enumerate() {
            let d = mean[j] - v;
            var[j] += d * d;
        }
    }
    let std = var.iter().map(|v| (v / n_c as f64).sqrt()).collect();
    (mean, std)
}

/// Run `n_c` MC-dropout passes for one input. Fails for `n_c < 2` (a single
/// pass has no spread to calibrate).
pub fn mc_predict(
    model: &DeepONetModel,
    u: &Matrix,
    grid: &QueryGrid,
    n_c: usize,
    base_seed: u64,
    retain_samples: bool,
) -> Result<EnsembleStats> {
    if n_c < 2 {
        return Err(CmcoError::InvalidConfig(format!(
            "mc_predict needs n_c >= 2 passes, got {n_c}"
        )));
    }
    let p = grid.len();
    let mut samples = Matrix::zeros(n_c, p);
    for k in 0..n_c {
        let stream = RngStream::new(base_seed, domains::MC_PASS + k as u64);
        let pred = model.forward(u, grid, true, stream)?;
        samples.row_mut(k).copy_from_slice(&pred);
    }
    let (mean, std) = reduce_passes(&samples);
    Ok(EnsembleStats {
        samples: retain_samples.then_some(samples),
        mean,
        std,
        n_c,
    })
}
