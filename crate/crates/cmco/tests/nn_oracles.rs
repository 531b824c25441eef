//! Scalar-loop oracles for the forward kernels: independently coded GRU and
//! LSTM steps written directly from the gate equations, compared entry by
//! entry against the batched implementations.

use cmco::nn::gru::{gru_step, GruLayer};
use cmco::nn::lstm::{lstm_step, LstmLayer};
use cmco::nn::matrix::Matrix;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Deterministic pseudo-random values (LCG) so the oracle file has no
/// dependency on the crate's RNG.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn matrix(&mut self, r: usize, c: usize) -> Matrix {
        let data = (0..r * c).map(|_| self.next() * 0.8).collect();
        Matrix::from_vec(r, c, data).unwrap()
    }

    fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next() * 0.8).collect()
    }
}

/// GRU step written as plain scalar loops over the gate equations.
fn gru_oracle(x: &[f64], h: &[f64], layer: &GruLayer) -> Vec<f64> {
    let hid = layer.hidden();
    let lin = |w: &Matrix, inp: &[f64], b: &[f64], block: usize, j: usize| -> f64 {
        let col = block * hid + j;
        let mut acc = b[col];
        for (k, &v) in inp.iter().enumerate() {
            acc += v * w.get(k, col);
        }
        acc
    };
    let mut out = vec![0.0; hid];
    for j in 0..hid {
        let r = sigmoid(lin(&layer.w_ih, x, &layer.b_ih, 0, j) + lin(&layer.w_hh, h, &layer.b_hh, 0, j));
        let z = sigmoid(lin(&layer.w_ih, x, &layer.b_ih, 1, j) + lin(&layer.w_hh, h, &layer.b_hh, 1, j));
        let n = (lin(&layer.w_ih, x, &layer.b_ih, 2, j) + r * lin(&layer.w_hh, h, &layer.b_hh, 2, j)).tanh();
        out[j] = (1.0 - z) * n + z * h[j];
    }
    out
}

/// LSTM step written as plain scalar loops.
fn lstm_oracle(x: &[f64], h: &[f64], c: &[f64], layer: &LstmLayer) -> (Vec<f64>, Vec<f64>) {
    let hid = layer.hidden();
    let lin = |w: &Matrix, inp: &[f64], b: &[f64], block: usize, j: usize| -> f64 {
        let col = block * hid + j;
        let mut acc = b[col];
        for (k, &v) in inp.iter().enumerate() {
            acc += v * w.get(k, col);
        }
        acc
    };
    let mut h_new = vec![0.0; hid];
    let mut c_new = vec![0.0; hid];
    for j in 0..hid {
        let i = sigmoid(lin(&layer.w_ih, x, &layer.b_ih, 0, j) + lin(&layer.w_hh, h, &layer.b_hh, 0, j));
        let f = sigmoid(lin(&layer.w_ih, x, &layer.b_ih, 1, j) + lin(&layer.w_hh, h, &layer.b_hh, 1, j));
        let g = (lin(&layer.w_ih, x, &layer.b_ih, 2, j) + lin(&layer.w_hh, h, &layer.b_hh, 2, j)).tanh();
        let o = sigmoid(lin(&layer.w_ih, x, &layer.b_ih, 3, j) + lin(&layer.w_hh, h, &layer.b_hh, 3, j));
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    (h_new, c_new)
}

#[test]
fn gru_step_matches_scalar_oracle() {
    let mut lcg = Lcg(0x5EED);
    for (i_dim, h_dim) in [(1, 4), (3, 5), (2, 2)] {
        let layer = GruLayer {
            w_ih: lcg.matrix(i_dim, 3 * h_dim),
            w_hh: lcg.matrix(h_dim, 3 * h_dim),
            b_ih: lcg.vec(3 * h_dim),
            b_hh: lcg.vec(3 * h_dim),
        };
        let x = lcg.vec(i_dim);
        let h = lcg.vec(h_dim);
        let fast = gru_step(&x, &h, &layer).unwrap();
        let slow = gru_oracle(&x, &h, &layer);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn lstm_step_matches_scalar_oracle() {
    let mut lcg = Lcg(0xFACE);
    for (i_dim, h_dim) in [(1, 4), (3, 5), (2, 2)] {
        let layer = LstmLayer {
            w_ih: lcg.matrix(i_dim, 4 * h_dim),
            w_hh: lcg.matrix(h_dim, 4 * h_dim),
            b_ih: lcg.vec(4 * h_dim),
            b_hh: lcg.vec(4 * h_dim),
        };
        let x = lcg.vec(i_dim);
        let h = lcg.vec(h_dim);
        let c = lcg.vec(h_dim);
        let (h_fast, c_fast) = lstm_step(&x, (&h, &c), &layer).unwrap();
        let (h_slow, c_slow) = lstm_oracle(&x, &h, &c, &layer);
        for (a, b) in h_fast.iter().zip(&h_slow) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in c_fast.iter().zip(&c_slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn gru_sequence_batch_rows_match_per_sample_runs() {
    // Batched processing must be exactly the per-sample recursion.
    let mut lcg = Lcg(0xBEEF);
    let layer = GruLayer {
        w_ih: lcg.matrix(2, 3 * 4),
        w_hh: lcg.matrix(4, 3 * 4),
        b_ih: lcg.vec(3 * 4),
        b_hh: lcg.vec(3 * 4),
    };
    let t_len = 5;
    let batch = 3;
    let xs: Vec<Matrix> = (0..t_len).map(|_| lcg.matrix(batch, 2)).collect();
    let (hs, _) = layer.forward_seq(&xs).unwrap();

    for b in 0..batch {
        let mut h = vec![0.0; 4];
        for (t, x) in xs.iter().enumerate() {
            h = gru_oracle(x.row(b), &h, &layer);
            for (a, e) in hs[t].row(b).iter().zip(&h) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }
}
