//! Shared domain containers: input sequences, query grids, datasets.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;

/// A discretized input signal, `[T steps x C channels]`.
pub type InputFunction = Matrix;

/// Spatial query points, `[P x d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGrid {
    pub coords: Matrix,
}

impl QueryGrid {
    pub fn new(coords: Matrix) -> Self {
        QueryGrid { coords }
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.cols()
    }

    /// Per-dimension (min, max) over the grid.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let d = self.dim();
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for i in 0..self.len() {
            for (j, b) in out.iter_mut().enumerate() {
                let v = self.coords.get(i, j);
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        out
    }
}

/// Which pipeline stage a split is allowed to feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Calibration,
    Test,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Calibration => "calibration",
            Role::Test => "test",
        }
    }
}

/// A set of (input sequence, output field) pairs over one shared query grid.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// One `[T x C]` matrix per sample.
    pub branch_inputs: Vec<InputFunction>,
    pub grid: QueryGrid,
    /// `[N x P]`, row i is the field for sample i.
    pub fields: Matrix,
    pub role: Role,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.branch_inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branch_inputs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.branch_inputs.len();
        if self.fields.rows() != n {
            return Err(CmcoError::shape(
                "Dataset::validate",
                format!("{} inputs vs {} field rows", n, self.fields.rows()),
            ));
        }
        if self.fields.cols() != self.grid.len() {
            return Err(CmcoError::shape(
                "Dataset::validate",
                format!("{} field cols vs {} grid points", self.fields.cols(), self.grid.len()),
            ));
        }
        if let Some(first) = self.branch_inputs.first() {
            let (t, c) = (first.rows(), first.cols());
            for (i, m) in self.branch_inputs.iter().enumerate() {
                if m.rows() != t || m.cols() != c {
                    return Err(CmcoError::shape(
                        "Dataset::validate",
                        format!("sample {i} is {}x{}, expected {t}x{c}", m.rows(), m.cols()),
                    ));
                }
                if !m.is_finite() {
                    return Err(CmcoError::NumericFailure(format!(
                        "non-finite branch input in sample {i}"
                    )));
                }
            }
        }
        if !self.fields.is_finite() {
            return Err(CmcoError::NumericFailure("non-finite field values".into()));
        }
        Ok(())
    }

    /// (T, C) of the branch inputs.
    pub fn seq_shape(&self) -> (usize, usize) {
        self.branch_inputs
            .first()
            .map(|m| (m.rows(), m.cols()))
            .unwrap_or((0, 0))
    }
}
