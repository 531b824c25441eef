//! Fully connected layer `y = act(x W + b)` with hand-written backward.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    None,
}

impl Activation {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::None => z,
        }
    }

    /// Derivative expressed in terms of the pre-activation.
    #[inline]
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::None => 1.0,
        }
    }
}

/// Weights `[I x O]` plus bias `[O]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub act: Activation,
}

/// Values the backward pass needs: the input and the pre-activation.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub x: Matrix,
    pub pre: Matrix,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dw: Matrix,
    pub db: Vec<f64>,
}

impl Dense {
    pub fn new(w: Matrix, b: Vec<f64>, act: Activation) -> Result<Self> {
        if b.len() != w.cols() {
            return Err(CmcoError::shape(
                "Dense::new",
                format!("bias len {} vs W cols {}", b.len(), w.cols()),
            ));
        }
        Ok(Dense { w, b, act })
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    /// Forward only; no cache.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let (y, _) = self.forward_cached(x)?;
        Ok(y)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        if x.cols() != self.w.rows() {
            return Err(CmcoError::shape(
                "dense_forward",
                format!("input {}x{} vs W {}x{}", x.rows(), x.cols(), self.w.rows(), self.w.cols()),
            ));
        }
        let mut pre = x.matmul(&self.w)?;
        pre.add_row_broadcast(&self.b)?;
        let mut y = pre.clone();
        let act = self.act;
        y.map_inplace(|z| act.apply(z));
        Ok((y, DenseCache { x: x.clone(), pre }))
    }

    /// Given `dL/dy`, return `dL/dx` and the parameter gradients.
    pub fn backward(&self, cache: &DenseCache, dy: &Matrix) -> Result<(Matrix, DenseGrads)> {
        if dy.rows() != cache.pre.rows() || dy.cols() != cache.pre.cols() {
            return Err(CmcoError::shape(
                "dense_backward",
                format!("dy {}x{} vs pre {}x{}", dy.rows(), dy.cols(), cache.pre.rows(), cache.pre.cols()),
            ));
        }
        // dz = dy * act'(pre)
        let mut dz = dy.clone();
        for (g, &z) in dz.data_mut().iter_mut().zip(cache.pre.data()) {
            *g *= self.act.derivative(z);
        }
        let dw = cache.x.tr_matmul(&dz)?;
        let db = dz.col_sums();
        let dx = dz.matmul_tr(&self.w)?;
        Ok((dx, DenseGrads { dw, db }))
    }
}

/// Free-function form of the forward pass for one-off use.
pub fn dense_forward(x: &Matrix, w: &Matrix, b: &[f64], act: Activation) -> Result<Matrix> {
    Dense::new(w.clone(), b.to_vec(), act)?.forward(x)
}
