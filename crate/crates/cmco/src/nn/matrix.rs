//! Row-major `f64` matrix with the handful of BLAS-like kernels the layers
//! need. The multiply kernels run the k-loop in the middle so the innermost
//! loop walks both output row and B-row contiguously.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CmcoError::shape(
                "Matrix::from_vec",
                format!("{}x{} needs {} values, got {}", rows, cols, rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested rows; handy in tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`, shapes `[m x k] * [k x n] -> [m x n]`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(CmcoError::shape(
                "matmul",
                format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        matmul_into(&mut out, self, other, false);
        Ok(out)
    }

    /// `out += self * other` without reallocating.
    pub fn matmul_acc(&self, other: &Matrix, out: &mut Matrix) -> Result<()> {
        if self.cols != other.rows || out.rows != self.rows || out.cols != other.cols {
            return Err(CmcoError::shape(
                "matmul_acc",
                format!(
                    "{}x{} * {}x{} -> {}x{}",
                    self.rows, self.cols, other.rows, other.cols, out.rows, out.cols
                ),
            ));
        }
        matmul_into(out, self, other, true);
        Ok(())
    }

    /// `self^T * other`, shapes `[k x m]^T * [k x n] -> [m x n]`. Used by the
    /// backward passes for weight gradients without materializing transposes.
    pub fn tr_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(CmcoError::shape(
                "tr_matmul",
                format!("{}x{}^T * {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        // out[i][j] += sum_k self[k][i] * other[k][j]
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = &other.data[k * other.cols..(k + 1) * other.cols];
            for (i, &av) in arow.iter().enumerate() {
                if av != 0.0 {
                    let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, shapes `[m x k] * [n x k]^T -> [m x n]`.
    pub fn matmul_tr(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(CmcoError::shape(
                "matmul_tr",
                format!("{}x{} * {}x{}^T", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = &mut out.data[i * other.rows..(i + 1) * other.rows];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = &other.data[j * other.cols..(j + 1) * other.cols];
                let mut acc = 0.0;
                for (&av, &bv) in arow.iter().zip(brow) {
                    acc += av * bv;
                }
                *o = acc;
            }
        }
        Ok(out)
    }

    /// Add a row vector to every row.
    pub fn add_row_broadcast(&mut self, bias: &[f64]) -> Result<()> {
        if bias.len() != self.cols {
            return Err(CmcoError::shape(
                "add_row_broadcast",
                format!("bias len {} vs cols {}", bias.len(), self.cols),
            ));
        }
        for i in 0..self.rows {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, &b) in row.iter_mut().zip(bias) {
                *r += b;
            }
        }
        Ok(())
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(CmcoError::shape(
                "add_assign",
                format!("{}x{} += {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Sum over rows, yielding a length-`cols` vector. Used for bias grads.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }
}

fn matmul_into(out: &mut Matrix, a: &Matrix, b: &Matrix, accumulate: bool) {
    if !accumulate {
        out.data.fill(0.0);
    }
    let n = b.cols;
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * n..(i + 1) * n];
        for (k, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let brow = &b.data[k * n..(k + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Naive triple-loop reference used as the oracle for the fast kernel.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> Matrix {
        // Small LCG keeps this oracle test free of the crate's own RNG.
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let data: Vec<f64> = (0..rows * cols).map(|_| next()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        for (m, k, n, seed) in [(3, 4, 2, 7), (5, 5, 5, 11), (1, 8, 3, 13), (6, 2, 9, 17)] {
            let a = pseudo_random(m, k, seed);
            let b = pseudo_random(k, n, seed + 100);
            let fast = a.matmul(&b).unwrap();
            let slow = matmul_oracle(&a, &b);
            for (x, y) in fast.data().iter().zip(slow.data()) {
                assert!((x - y).abs() < 1e-12, "fast {} vs oracle {}", x, y);
            }
        }
    }

    #[test]
    fn tr_matmul_and_matmul_tr_match_explicit_transpose() {
        let a = pseudo_random(4, 3, 23);
        let b = pseudo_random(4, 5, 29);
        let viat = a.transpose().matmul(&b).unwrap();
        let fused = a.tr_matmul(&b).unwrap();
        assert_eq!(viat, fused);

        let c = pseudo_random(6, 3, 31);
        let d = pseudo_random(2, 3, 37);
        let viat2 = c.matmul(&d.transpose()).unwrap();
        let fused2 = c.matmul_tr(&d).unwrap();
        for (x, y) in viat2.data().iter().zip(fused2.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        assert!(matches!(a.matmul(&b), Err(CmcoError::ShapeMismatch { .. })));
    }

    #[test]
    fn identity_multiplication_is_identity() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]);
        let out = x.matmul(&Matrix::identity(2)).unwrap();
        assert_eq!(out, x);
    }
}
