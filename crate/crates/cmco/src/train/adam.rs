//! Adam with bias correction, operating on flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment state; one slot per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// Advance one step, incrementing the internal step counter.
    pub fn apply(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
        hyper: &AdamHyper,
    ) -> Result<()> {
        self.t += 1;
        let t = self.t;
        adam_step(params, grads, self, t, lr, hyper)
    }
}

/// One bias-corrected Adam update at step `t` (1-based):
///
/// ```text
/// m <- b1 m + (1-b1) g        v <- b2 v + (1-b2) g^2
/// mhat = m / (1 - b1^t)       vhat = v / (1 - b2^t)
/// theta <- theta - lr * mhat / (sqrt(vhat) + eps)
/// ```
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    t: u64,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(CmcoError::shape(
            "adam_step",
            format!(
                "params {}, grads {}, state {}",
                params.len(), grads.len(), state.m.len()
            ),
        ));
    }
    if t == 0 {
        return Err(CmcoError::InvalidConfig("adam step index must be >= 1".into()));
    }
    if let Some(idx) = grads.iter().position(|g| !g.is_finite()) {
        return Err(CmcoError::NumericFailure(format!(
            "non-finite gradient at parameter index {idx} (value {})",
            grads[idx]
        )));
    }
    let bc1 = 1.0 - hyper.beta1.powi(t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + hyper.eps);
    }
    Ok(())
}
