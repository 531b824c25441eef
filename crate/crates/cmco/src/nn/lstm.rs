//! LSTM cell with two bias vectors per gate block.
//!
//! Gate column blocks `[i | f | g | o]`:
//!
//! ```text
//! i = sigmoid(x W_ii + b_ii + h W_hi + b_hi)
//! f = sigmoid(x W_if + b_if + h W_hf + b_hf)
//! g = tanh   (x W_ig + b_ig + h W_hg + b_hg)
//! o = sigmoid(x W_io + b_io + h W_ho + b_ho)
//! c' = f .* c + i .* g
//! h' = o .* tanh(c')
//! ```
//!
//! Both bias vectors feed every gate pre-activation, so they share one
//! gradient; they stay separate parameters for the count contract.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmLayer {
    /// `[I x 4H]`, column blocks i|f|g|o.
    pub w_ih: Matrix,
    /// `[H x 4H]`, column blocks i|f|g|o.
    pub w_hh: Matrix,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub h_prev: Matrix,
    pub c_prev: Matrix,
    pub i: Matrix,
    pub f: Matrix,
    pub g: Matrix,
    pub o: Matrix,
    pub c_new: Matrix,
}

#[derive(Debug, Clone)]
pub struct LstmSeqCache {
    pub steps: Vec<LstmStepCache>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub dw_ih: Matrix,
    pub dw_hh: Matrix,
    pub db_ih: Vec<f64>,
    pub db_hh: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmLayer {
            w_ih: Matrix::zeros(input_dim, 4 * hidden),
            w_hh: Matrix::zeros(hidden, 4 * hidden),
            b_ih: vec![0.0; 4 * hidden],
            b_hh: vec![0.0; 4 * hidden],
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
        4 * (i * h + h * h + 2 * h)
    }

    /// One step over a batch: `x [B x I]`, state `(h, c)` -> `(h', c')`.
    pub fn step(
        &self,
        x: &Matrix,
        h: &Matrix,
        c: &Matrix,
    ) -> Result<(Matrix, Matrix, LstmStepCache)> {
        let hid = self.hidden();
        if x.cols() != self.input_dim()
            || h.cols() != hid
            || c.cols() != hid
            || x.rows() != h.rows()
            || x.rows() != c.rows()
        {
            return Err(CmcoError::shape(
                "lstm_step",
                format!(
                    "x {}x{}, h {}x{}, c {}x{}, layer I={} H={}",
                    x.rows(), x.cols(), h.rows(), h.cols(), c.rows(), c.cols(),
                    self.input_dim(), hid
                ),
            ));
        }
        let b = x.rows();
        let mut gates = x.matmul(&self.w_ih)?;
        gates.add_row_broadcast(&self.b_ih)?;
        gates.add_assign(&{
            let mut gh = h.matmul(&self.w_hh)?;
            gh.add_row_broadcast(&self.b_hh)?;
            gh
        })?;

        let mut ig = Matrix::zeros(b, hid);
        let mut fg = Matrix::zeros(b, hid);
        let mut gg = Matrix::zeros(b, hid);
        let mut og = Matrix::zeros(b, hid);
        let mut c_new = Matrix::zeros(b, hid);
        let mut h_new = Matrix::zeros(b, hid);
        for row in 0..b {
            let gr = gates.row(row);
            let cp = c.row(row);
            for j in 0..hid {
                let iv = sigmoid(gr[j]);
                let fv = sigmoid(gr[hid + j]);
                let gv = gr[2 * hid + j].tanh();
                let ov = sigmoid(gr[3 * hid + j]);
                let cv = fv * cp[j] + iv * gv;
                ig.row_mut(row)[j] = iv;
                fg.row_mut(row)[j] = fv;
                gg.row_mut(row)[j] = gv;
                og.row_mut(row)[j] = ov;
                c_new.row_mut(row)[j] = cv;
                h_new.row_mut(row)[j] = ov * cv.tanh();
            }
        }
        let cache = LstmStepCache {
            h_prev: h.clone(),
            c_prev: c.clone(),
            i: ig,
            f: fg,
            g: gg,
            o: og,
            c_new: c_new.clone(),
        };
        Ok((h_new, c_new, cache))
    }

    pub fn forward_seq(&self, xs: &[Matrix]) -> Result<(Vec<Matrix>, LstmSeqCache)> {
        let b = xs.first().map(|m| m.rows()).unwrap_or(0);
        let mut h = Matrix::zeros(b, self.hidden());
        let mut c = Matrix::zeros(b, self.hidden());
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let (h_new, c_new, cache) = self.step(x, &h, &c)?;
            steps.push(cache);
            hs.push(h_new.clone());
            h = h_new;
            c = c_new;
        }
        Ok((hs, LstmSeqCache { steps }))
    }

    pub fn backward_seq(
        &self,
        xs: &[Matrix],
        cache: &LstmSeqCache,
        dhs: &[Matrix],
    ) -> Result<(Vec<Matrix>, LstmGrads)> {
        let t_len = xs.len();
        if cache.steps.len() != t_len || dhs.len() != t_len {
            return Err(CmcoError::shape(
                "lstm_backward_seq",
                format!("xs {} steps, cache {}, dhs {}", t_len, cache.steps.len(), dhs.len()),
            ));
        }
        let hid = self.hidden();
        let b = xs[0].rows();
        let mut grads = LstmGrads {
            dw_ih: Matrix::zeros(self.input_dim(), 4 * hid),
            dw_hh: Matrix::zeros(hid, 4 * hid),
            db_ih: vec![0.0; 4 * hid],
            db_hh: vec![0.0; 4 * hid],
        };
        let mut dxs = vec![Matrix::zeros(0, 0); t_len];
        let mut dh_carry = Matrix::zeros(b, hid);
        let mut dc_carry = Matrix::zeros(b, hid);
        for t in (0..t_len).rev() {
            let st = &cache.steps[t];
            let mut dh = dhs[t].clone();
            dh.add_assign(&dh_carry)?;

            let mut da = Matrix::zeros(b, 4 * hid);
            let mut dc_prev = Matrix::zeros(b, hid);
            for row in 0..b {
                let dhr = dh.row(row);
                let dcr = dc_carry.row(row);
                let iv = st.i.row(row);
                let fv = st.f.row(row);
                let gv = st.g.row(row);
                let ov = st.o.row(row);
                let cp = st.c_prev.row(row);
                let cn = st.c_new.row(row);
                let dar = da.row_mut(row);
                for j in 0..hid {
                    let tc = cn[j].tanh();
                    let dov = dhr[j] * tc;
                    let dc_total = dcr[j] + dhr[j] * ov[j] * (1.0 - tc * tc);
                    let div = dc_total * gv[j];
                    let dfv = dc_total * cp[j];
                    let dgv = dc_total * iv[j];
                    dar[j] = div * iv[j] * (1.0 - iv[j]);
                    dar[hid + j] = dfv * fv[j] * (1.0 - fv[j]);
                    dar[2 * hid + j] = dgv * (1.0 - gv[j] * gv[j]);
                    dar[3 * hid + j] = dov * ov[j] * (1.0 - ov[j]);
                    dc_prev.row_mut(row)[j] = dc_total * fv[j];
                }
            }
            xs[t].tr_matmul(&da)?.data().iter().zip(grads.dw_ih.data_mut()).for_each(|(&g, a)| *a += g);
            st.h_prev.tr_matmul(&da)?.data().iter().zip(grads.dw_hh.data_mut()).for_each(|(&g, a)| *a += g);
            let bias_grad = da.col_sums();
            for (acc, &g) in grads.db_ih.iter_mut().zip(&bias_grad) {
                *acc += g;
            }
            for (acc, &g) in grads.db_hh.iter_mut().zip(&bias_grad) {
                *acc += g;
            }
            dxs[t] = da.matmul_tr(&self.w_ih)?;
            dh_carry = da.matmul_tr(&self.w_hh)?;
            dc_carry = dc_prev;
        }
        Ok((dxs, grads))
    }
}

/// Single-vector step: `(h, c) -> (h', c')`.
pub fn lstm_step(
    x_t: &[f64],
    state: (&[f64], &[f64]),
    params: &LstmLayer,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = Matrix::from_vec(1, x_t.len(), x_t.to_vec())?;
    let h = Matrix::from_vec(1, state.0.len(), state.0.to_vec())?;
    let c = Matrix::from_vec(1, state.1.len(), state.1.to_vec())?;
    let (h_new, c_new, _) = params.step(&x, &h, &c)?;
    Ok((h_new.into_data(), c_new.into_data()))
}
