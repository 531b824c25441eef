//! Seeded, disjoint dataset splitting into train/calibration/test roles.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Role};
use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;
use crate::nn::rng::RngStream;

/// Stream-id namespace for the split shuffle.
const SPLIT_STREAM: u64 = 6 << 32;

/// Untagged serde keeps config files plain: `[600, 200, 200]` parses as
/// counts (tried first; fractional values fail integer parsing and fall
/// through), `[0.8, 0.1, 0.1]` as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    /// Absolute counts; may sum to less than N, in which case the surplus
    /// samples are left unused (not exhaustive).
    Counts(usize, usize, usize),
    /// `(train, calibration, test)` fractions summing to 1. Rounding rule:
    /// train and calibration take the floor, test takes the remainder.
    Fractions(f64, f64, f64),
}

impl SplitSpec {
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        let (tr, cal, te) = match self {
            SplitSpec::Fractions(a, b, c) => {
                if (a + b + c - 1.0).abs() > 1e-9 {
                    return Err(CmcoError::InvalidConfig(format!(
                        "split fractions must sum to 1, got {a} + {b} + {c}"
                    )));
                }
                if *a < 0.0 || *b < 0.0 || *c < 0.0 {
                    return Err(CmcoError::InvalidConfig("split fractions must be >= 0".into()));
                }
                let tr = (a * n as f64).floor() as usize;
                let cal = (b * n as f64).floor() as usize;
                let te = n - tr - cal;
                (tr, cal, te)
            }
            SplitSpec::Counts(a, b, c) => {
                if a + b + c > n {
                    return Err(CmcoError::InvalidConfig(format!(
                        "split counts {a}+{b}+{c} exceed dataset size {n}"
                    )));
                }
                (*a, *b, *c)
            }
        };
        for (name, size) in [("train", tr), ("calibration", cal), ("test", te)] {
            if size == 0 {
                return Err(CmcoError::InvalidConfig(format!("empty {name} split")));
            }
        }
        Ok((tr, cal, te))
    }
}

fn subset(data: &Dataset, indices: &[usize], role: Role) -> Dataset {
    let mut fields = Matrix::zeros(indices.len(), data.fields.cols());
    let mut inputs = Vec::with_capacity(indices.len());
    for (row, &i) in indices.iter().enumerate() {
        fields.row_mut(row).copy_from_slice(data.fields.row(i));
        inputs.push(data.branch_inputs[i].clone());
    }
    Dataset {
        branch_inputs: inputs,
        grid: data.grid.clone(),
        fields,
        role,
    }
}

/// Shuffle sample indices with the seed and carve out the three roles.
pub fn split_dataset(
    data: &Dataset,
    spec: &SplitSpec,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let n = data.len();
    let (n_train, n_cal, n_test) = spec.sizes(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(seed, SPLIT_STREAM).rng();
    order.shuffle(&mut rng);

    let train_idx = &order[..n_train];
    let cal_idx = &order[n_train..n_train + n_cal];
    let test_idx = &order[n_train + n_cal..n_train + n_cal + n_test];
    Ok((
        subset(data, train_idx, Role::Train),
        subset(data, cal_idx, Role::Calibration),
        subset(data, test_idx, Role::Test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::QueryGrid;

    fn dataset(n: usize) -> Dataset {
        let inputs = (0..n)
            .map(|i| Matrix::from_vec(2, 1, vec![i as f64, -(i as f64)]).unwrap())
            .collect();
        let mut fields = Matrix::zeros(n, 3);
        for i in 0..n {
            fields.row_mut(i).copy_from_slice(&[i as f64; 3]);
        }
        Dataset {
            branch_inputs: inputs,
            grid: QueryGrid::new(Matrix::from_rows(&[vec![0.0], vec![0.5], vec![1.0]])),
            fields,
            role: Role::Train,
        }
    }

    #[test]
    fn ten_samples_split_eight_one_one() {
        let sizes = SplitSpec::Fractions(0.8, 0.1, 0.1).sizes(10).unwrap();
        assert_eq!(sizes, (8, 1, 1));
    }

    #[test]
    fn reference_ratio_rounding() {
        // floor on train and calibration, remainder to test.
        let sizes = SplitSpec::Fractions(0.8, 0.1, 0.1).sizes(4937).unwrap();
        assert_eq!(sizes, (3949, 493, 495));
    }

    #[test]
    fn counts_may_leave_samples_unused() {
        let sizes = SplitSpec::Counts(10, 5, 2).sizes(100).unwrap();
        assert_eq!(sizes, (10, 5, 2));
        assert!(SplitSpec::Counts(90, 20, 5).sizes(100).is_err());
    }

    #[test]
    fn empty_split_is_a_config_error() {
        assert!(SplitSpec::Fractions(1.0, 0.0, 0.0).sizes(10).is_err());
        assert!(SplitSpec::Fractions(0.5, 0.3, 0.2).sizes(3).is_err());
    }

    #[test]
    fn splits_are_disjoint_exhaustive_and_seed_deterministic() {
        let data = dataset(37);
        let spec = SplitSpec::Fractions(0.6, 0.2, 0.2);
        let (tr, cal, te) = split_dataset(&data, &spec, 5).unwrap();
        assert_eq!(tr.len() + cal.len() + te.len(), 37);
        assert_eq!(tr.role, Role::Train);
        assert_eq!(cal.role, Role::Calibration);
        assert_eq!(te.role, Role::Test);

        // Field row values identify the original sample.
        let mut seen: Vec<u64> = Vec::new();
        for ds in [&tr, &cal, &te] {
            for i in 0..ds.len() {
                seen.push(ds.fields.get(i, 0) as u64);
            }
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..37).collect::<Vec<u64>>());

        let (tr2, cal2, te2) = split_dataset(&data, &spec, 5).unwrap();
        assert_eq!(tr.fields, tr2.fields);
        assert_eq!(cal.fields, cal2.fields);
        assert_eq!(te.fields, te2.fields);

        let (tr3, _, _) = split_dataset(&data, &spec, 6).unwrap();
        assert_ne!(tr.fields, tr3.fields, "different seed should reshuffle");
    }
}
