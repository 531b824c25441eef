//! Mean squared error over all batch entries and query points.

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

/// Returns the scalar loss and `dL/dpred = 2 (pred - truth) / (B * P)`.
pub fn mse_loss(pred: &Matrix, truth: &Matrix) -> Result<(f64, Matrix)> {
    if pred.rows() != truth.rows() || pred.cols() != truth.cols() {
        return Err(CmcoError::shape(
            "mse_loss",
            format!(
                "pred {}x{} vs truth {}x{}",
                pred.rows(), pred.cols(), truth.rows(), truth.cols()
            ),
        ));
    }
    let n = (pred.rows() * pred.cols()) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut acc = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(truth.data()) {
        let d = p - t;
        acc += d * d;
        *g = 2.0 * d / n;
    }
    Ok((acc / n, grad))
}
