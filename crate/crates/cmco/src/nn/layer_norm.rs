//! Layer normalization over the feature dimension.
//!
//! `y = gain (x - mean) / sqrt(var + eps) + shift`, with the variance taken
//! with the `1/H` divisor. Applied row-wise to `[B x H]` matrices.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub shift: Vec<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    /// Normalized input x-hat per row.
    pub xhat: Matrix,
    /// 1 / sqrt(var + eps) per row.
    pub inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerNormGrads {
    pub dgain: Vec<f64>,
    pub dshift: Vec<f64>,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        LayerNorm {
            gain: vec![1.0; width],
            shift: vec![0.0; width],
            eps: DEFAULT_EPS,
        }
    }

    pub fn width(&self) -> usize {
        self.gain.len()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, LayerNormCache)> {
        let h = self.gain.len();
        if x.cols() != h {
            return Err(CmcoError::shape(
                "layer_norm",
                format!("input cols {} vs width {}", x.cols(), h),
            ));
        }
        let mut y = Matrix::zeros(x.rows(), h);
        let mut xhat = Matrix::zeros(x.rows(), h);
        let mut inv_std = Vec::with_capacity(x.rows());
        let hf = h as f64;
        for i in 0..x.rows() {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / hf;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hf;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std.push(istd);
            let xh = xhat.row_mut(i);
            let yr = y.row_mut(i);
            for j in 0..h {
                let xn = (row[j] - mean) * istd;
                xh[j] = xn;
                yr[j] = self.gain[j] * xn + self.shift[j];
            }
        }
        Ok((y, LayerNormCache { xhat, inv_std }))
    }

    pub fn backward(
        &self,
        cache: &LayerNormCache,
        dy: &Matrix,
    ) -> Result<(Matrix, LayerNormGrads)> {
        let h = self.gain.len();
        if dy.cols() != h || dy.rows() != cache.xhat.rows() {
            return Err(CmcoError::shape(
                "layer_norm_backward",
                format!("dy {}x{} vs cache {}x{}", dy.rows(), dy.cols(), cache.xhat.rows(), h),
            ));
        }
        let hf = h as f64;
        let mut dgain = vec![0.0; h];
        let mut dshift = vec![0.0; h];
        let mut dx = Matrix::zeros(dy.rows(), h);
        for i in 0..dy.rows() {
            let dyr = dy.row(i);
            let xh = cache.xhat.row(i);
            let istd = cache.inv_std[i];
            // Gradient with respect to x-hat, plus its row statistics.
            let mut sum_dxh = 0.0;
            let mut sum_dxh_xh = 0.0;
            for j in 0..h {
                let dxh = dyr[j] * self.gain[j];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh[j];
                dgain[j] += dyr[j] * xh[j];
                dshift[j] += dyr[j];
            }
            let dxr = dx.row_mut(i);
            for j in 0..h {
                let dxh = dyr[j] * self.gain[j];
                dxr[j] = istd * (dxh - sum_dxh / hf - xh[j] * sum_dxh_xh / hf);
            }
        }
        Ok((dx, LayerNormGrads { dgain, dshift }))
    }
}

/// One-vector convenience form.
pub fn layer_norm(x: &[f64], gain: &[f64], shift: &[f64], eps: f64) -> Result<Vec<f64>> {
    let ln = LayerNorm {
        gain: gain.to_vec(),
        shift: shift.to_vec(),
        eps,
    };
    let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(ln.forward(&m)?.into_data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_maps_to_zero() {
        let x = [3.5; 8];
        let y = layer_norm(&x, &[1.0; 8], &[0.0; 8], DEFAULT_EPS).unwrap();
        for v in y {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn already_standardized_input_is_fixed_point_as_eps_vanishes() {
        let y = layer_norm(&[-1.0, 1.0], &[1.0; 2], &[0.0; 2], 1e-14).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-10);
        assert!((y[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn output_moments_are_standardized() {
        // Spread large enough that eps = 1e-5 perturbs the variance by < 1e-6.
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.73).sin() * 30.0 + 1.7).collect();
        let y = layer_norm(&x, &[1.0; 64], &[0.0; 64], DEFAULT_EPS).unwrap();
        let h = y.len() as f64;
        let mean = y.iter().sum::<f64>() / h;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h;
        assert!(mean.abs() < 1e-10, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-6, "var {var}");
    }
}
