//! Gated recurrent unit with two bias vectors per gate block.
//!
//! Gate layout follows the common reset/update/candidate convention with
//! column blocks `[r | z | n]` in the fused weight matrices:
//!
//! ```text
//! r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
//! z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
//! n = tanh   (x W_in + b_in + r .* (h W_hn + b_hn))
//! h' = (1 - z) .* n + z .* h
//! ```
//!
//! The separate input-side and hidden-side biases are redundant analytically
//! but are part of the parameter-count contract, so both are kept and both
//! receive gradients.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GruLayer {
    /// `[I x 3H]`, column blocks r|z|n.
    pub w_ih: Matrix,
    /// `[H x 3H]`, column blocks r|z|n.
    pub w_hh: Matrix,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

/// Per-step values the backward pass consumes.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub h_prev: Matrix,
    pub r: Matrix,
    pub z: Matrix,
    pub n: Matrix,
    /// Hidden-side candidate pre-activation `h W_hn + b_hn`.
    pub hn_lin: Matrix,
}

#[derive(Debug, Clone)]
pub struct GruSeqCache {
    pub steps: Vec<GruStepCache>,
}

#[derive(Debug, Clone)]
pub struct GruGrads {
    pub dw_ih: Matrix,
    pub dw_hh: Matrix,
    pub db_ih: Vec<f64>,
    pub db_hh: Vec<f64>,
}

impl GruLayer {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        GruLayer {
            w_ih: Matrix::zeros(input_dim, 3 * hidden),
            w_hh: Matrix::zeros(hidden, 3 * hidden),
            b_ih: vec![0.0; 3 * hidden],
            b_hh: vec![0.0; 3 * hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.rows()
    }

    pub fn param_count(&self) -> usize {
        let (i, h) = (self.input_dim(), self.hidden());
        3 * (i * h + h * h + 2 * h)
    }

    /// One step over a batch: `x [B x I]`, `h [B x H]` -> `h' [B x H]`.
    pub fn step(&self, x: &Matrix, h: &Matrix) -> Result<(Matrix, GruStepCache)> {
        let hid = self.hidden();
        if x.cols() != self.input_dim() || h.cols() != hid || x.rows() != h.rows() {
            return Err(CmcoError::shape(
                "gru_step",
                format!(
                    "x {}x{}, h {}x{}, layer I={} H={}",
                    x.rows(), x.cols(), h.rows(), h.cols(), self.input_dim(), hid
                ),
            ));
        }
        let b = x.rows();
        let mut gi = x.matmul(&self.w_ih)?;
        gi.add_row_broadcast(&self.b_ih)?;
        let mut gh = h.matmul(&self.w_hh)?;
        gh.add_row_broadcast(&self.b_hh)?;

        let mut r = Matrix::zeros(b, hid);
        let mut z = Matrix::zeros(b, hid);
        let mut n = Matrix::zeros(b, hid);
        let mut hn_lin = Matrix::zeros(b, hid);
        let mut h_new = Matrix::zeros(b, hid);
        for row in 0..b {
            let gi_r = &gi.row(row)[0..hid];
            let gi_z = &gi.row(row)[hid..2 * hid];
            let gi_n = &gi.row(row)[2 * hid..3 * hid];
            let gh_r = &gh.row(row)[0..hid];
            let gh_z = &gh.row(row)[hid..2 * hid];
            let gh_n = &gh.row(row)[2 * hid..3 * hid];
            let hp = h.row(row);
            for j in 0..hid {
                let rj = sigmoid(gi_r[j] + gh_r[j]);
                let zj = sigmoid(gi_z[j] + gh_z[j]);
                let nj = (gi_n[j] + rj * gh_n[j]).tanh();
                r.row_mut(row)[j] = rj;
                z.row_mut(row)[j] = zj;
                n.row_mut(row)[j] = nj;
                hn_lin.row_mut(row)[j] = gh_n[j];
                h_new.row_mut(row)[j] = (1.0 - zj) * nj + zj * hp[j];
            }
        }
        let cache = GruStepCache { h_prev: h.clone(), r, z, n, hn_lin };
        Ok((h_new, cache))
    }

    /// Run the whole sequence from a zero initial state. `xs[t]` is
    /// `[B x I]`; returns the hidden state at every step.
    pub fn forward_seq(&self, xs: &[Matrix]) -> Result<(Vec<Matrix>, GruSeqCache)> {
        let b = xs.first().map(|m| m.rows()).unwrap_or(0);
        let mut h = Matrix::zeros(b, self.hidden());
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let (h_new, cache) = self.step(x, &h)?;
            steps.push(cache);
            hs.push(h_new.clone());
            h = h_new;
        }
        Ok((hs, GruSeqCache { steps }))
    }

    /// Backpropagation through time. `dhs[t]` is the gradient arriving at
    /// the step-`t` output from outside the recurrence (zero for most steps
    /// when only the final state feeds the loss).
    pub fn backward_seq(
        &self,
        xs: &[Matrix],
        cache: &GruSeqCache,
        dhs: &[Matrix],
    ) -> Result<(Vec<Matrix>, GruGrads)> {
        let t_len = xs.len();
        if cache.steps.len() != t_len || dhs.len() != t_len {
            return Err(CmcoError::shape(
                "gru_backward_seq",
                format!("xs {} steps, cache {}, dhs {}", t_len, cache.steps.len(), dhs.len()),
            ));
        }
        let hid = self.hidden();
        let mut grads = GruGrads {
            dw_ih: Matrix::zeros(self.input_dim(), 3 * hid),
            dw_hh: Matrix::zeros(hid, 3 * hid),
            db_ih: vec![0.0; 3 * hid],
            db_hh: vec![0.0; 3 * hid],
        };
        let mut dxs = vec![Matrix::zeros(0, 0); t_len];
        let b = xs[0].rows();
        let mut carry = Matrix::zeros(b, hid);
        for t in (0..t_len).rev() {
            let st = &cache.steps[t];
            // Total gradient hitting h_t.
            let mut dh = dhs[t].clone();
            dh.add_assign(&carry)?;

            let mut da_i = Matrix::zeros(b, 3 * hid);
            let mut da_h = Matrix::zeros(b, 3 * hid);
            let mut dh_prev = Matrix::zeros(b, hid);
            for row in 0..b {
                let dhr = dh.row(row);
                let r = st.r.row(row);
                let z = st.z.row(row);
                let n = st.n.row(row);
                let hp = st.h_prev.row(row);
                let hn = st.hn_lin.row(row);
                let dai = da_i.row_mut(row);
                for j in 0..hid {
                    let dz = dhr[j] * (hp[j] - n[j]);
                    let dn = dhr[j] * (1.0 - z[j]);
                    let da_n = dn * (1.0 - n[j] * n[j]);
                    let dr = da_n * hn[j];
                    let dghn = da_n * r[j];
                    let da_r = dr * r[j] * (1.0 - r[j]);
                    let da_z = dz * z[j] * (1.0 - z[j]);
                    dai[j] = da_r;
                    dai[hid + j] = da_z;
                    dai[2 * hid + j] = da_n;
                    let dah = da_h.row_mut(row);
                    dah[j] = da_r;
                    dah[hid + j] = da_z;
                    dah[2 * hid + j] = dghn;
                    dh_prev.row_mut(row)[j] = dhr[j] * z[j];
                }
            }
            xs[t].tr_matmul(&da_i)?.data().iter().zip(grads.dw_ih.data_mut()).for_each(|(&g, a)| *a += g);
            st.h_prev.tr_matmul(&da_h)?.data().iter().zip(grads.dw_hh.data_mut()).for_each(|(&g, a)| *a += g);
            for (acc, g) in grads.db_ih.iter_mut().zip(da_i.col_sums()) {
                *acc += g;
            }
            for (acc, g) in grads.db_hh.iter_mut().zip(da_h.col_sums()) {
                *acc += g;
            }
            dxs[t] = da_i.matmul_tr(&self.w_ih)?;
            dh_prev.add_assign(&da_h.matmul_tr(&self.w_hh)?)?;
            carry = dh_prev;
        }
        Ok((dxs, grads))
    }
}

/// Single-vector step, the scalar form of [`GruLayer::step`].
pub fn gru_step(x_t: &[f64], h_prev: &[f64], params: &GruLayer) -> Result<Vec<f64>> {
    let x = Matrix::from_vec(1, x_t.len(), x_t.to_vec())?;
    let h = Matrix::from_vec(1, h_prev.len(), h_prev.to_vec())?;
    let (h_new, _) = params.step(&x, &h)?;
    Ok(h_new.into_data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_halve_previous_state() {
        // z = sigmoid(0) = 0.5 and n = tanh(0) = 0, so h' = 0.5 h.
        let layer = GruLayer::zeros(2, 3);
        let h = [0.4, -1.0, 2.0];
        let out = gru_step(&[1.0, -1.0], &h, &layer).unwrap();
        for (o, hv) in out.iter().zip(&h) {
            assert_eq!(*o, 0.5 * hv);
        }
    }

    #[test]
    fn zero_params_zero_state_stays_zero() {
        let layer = GruLayer::zeros(2, 3);
        let out = gru_step(&[5.0, 3.0], &[0.0; 3], &layer).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn shape_mismatch_errors() {
        let layer = GruLayer::zeros(2, 3);
        assert!(gru_step(&[1.0], &[0.0; 3], &layer).is_err());
        assert!(gru_step(&[1.0, 2.0], &[0.0; 2], &layer).is_err());
    }
}
