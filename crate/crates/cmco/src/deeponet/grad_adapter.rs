//! Adapter exposing a model + fixed batch + MSE loss as a gradient-checkable
//! fragment (dropout inactive).

use crate::error::Result;
use crate::nn::grad_check::{indexed_names, GradCheckable};
use crate::nn::matrix::Matrix;
use crate::nn::rng::RngStream;
use crate::train::loss::mse_loss;

use super::model::DeepONetModel;

pub struct ModelFragment {
    pub model: DeepONetModel,
    /// Sequence-major normalized inputs, `xs[t]` of shape `[B x C]`.
    pub xs: Vec<Matrix>,
    /// Normalized query grid `[P x d]`.
    pub grid: Matrix,
    pub targets: Matrix,
}

impl ModelFragment {
    fn run(&self) -> Result<(f64, Matrix, super::model::BatchCache)> {
        let mut rng = RngStream::new(0, 0).rng();
        let (pred, cache) = self
            .model
            .forward_batch_normalized(&self.xs, &self.grid, false, &mut rng)?;
        let (loss, dout) = mse_loss(&pred, &self.targets)?;
        Ok((loss, dout, cache))
    }
}

impl GradCheckable for ModelFragment {
    fn param_names(&self) -> Vec<String> {
        self.model
            .param_blocks()
            .into_iter()
            .flat_map(|(name, shape)| indexed_names(&name, shape.iter().product()))
            .collect()
    }

    fn params(&self) -> Vec<f64> {
        self.model.flatten_params()
    }

    fn set_params(&mut self, values: &[f64]) {
        self.model
            .assign_params(values)
            .expect("grad check feeds same-length vectors");
    }

    fn loss(&mut self) -> Result<f64> {
        Ok(self.run()?.0)
    }

    fn loss_and_grad(&mut self) -> Result<(f64, Vec<f64>)> {
        let (loss, dout, cache) = self.run()?;
        Ok((loss, self.model.backward_batch(&cache, &dout)?))
    }
}
