//! Inverted dropout.
//!
//! When active, each entry is zeroed independently with probability `p` and
//! survivors are scaled by `1/(1-p)`, so expectations match between the
//! active and inactive modes. The same code path serves training and
//! MC-dropout inference; the caller chooses when the mask stays on.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;
use crate::nn::rng::RngStream;

/// Keep/drop mask with the survivor scale baked in.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    /// Per-entry multipliers: `0` for dropped entries, `1/(1-p)` for kept.
    pub scale: Vec<f64>,
}

impl DropoutMask {
    pub fn kept(&self) -> usize {
        self.scale.iter().filter(|&&s| s != 0.0).count()
    }
}

/// Apply dropout from a fresh stream. `active` selects training/MC mode;
/// when inactive the input passes through and the mask is all ones.
pub fn dropout_apply(
    x: &Matrix,
    p: f64,
    stream: RngStream,
    active: bool,
) -> Result<(Matrix, DropoutMask)> {
    let mut rng = stream.rng();
    dropout_apply_with(x, p, &mut rng, active)
}

/// Same as [`dropout_apply`] but drawing from an already-positioned
/// generator, so a sequence of layers can share one stream.
pub fn dropout_apply_with(
    x: &Matrix,
    p: f64,
    rng: &mut ChaCha8Rng,
    active: bool,
) -> Result<(Matrix, DropoutMask)> {
    if !(0.0..1.0).contains(&p) {
        return Err(CmcoError::InvalidConfig(format!(
            "dropout rate must satisfy 0 <= p < 1, got {p}"
        )));
    }
    let n = x.rows() * x.cols();
    if !active || p == 0.0 {
        return Ok((
            x.clone(),
            DropoutMask { scale: vec![1.0; n] },
        ));
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mut scale = Vec::with_capacity(n);
    let mut out = x.clone();
    for v in out.data_mut() {
        let s = if rng.random::<f64>() < p { 0.0 } else { keep_scale };
        *v *= s;
        scale.push(s);
    }
    Ok((out, DropoutMask { scale }))
}

/// Route the upstream gradient through the mask.
pub fn dropout_backward(dy: &Matrix, mask: &DropoutMask) -> Matrix {
    let mut dx = dy.clone();
    for (g, &s) in dx.data_mut().iter_mut().zip(&mask.scale) {
        *g *= s;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(rows: usize, cols: usize, v: f64) -> Matrix {
        Matrix::from_vec(rows, cols, vec![v; rows * cols]).unwrap()
    }

    #[test]
    fn p_zero_is_identity_with_all_ones_mask() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let (y, mask) = dropout_apply(&x, 0.0, RngStream::new(1, 1), true).unwrap();
        assert_eq!(y, x);
        assert_eq!(mask.kept(), 4);
    }

    #[test]
    fn inactive_flag_is_identity_regardless_of_p() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 4.0]]);
        let (y, _) = dropout_apply(&x, 0.9, RngStream::new(1, 1), false).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn invalid_rate_is_rejected() {
        let x = filled(1, 1, 1.0);
        assert!(dropout_apply(&x, 1.0, RngStream::new(1, 1), true).is_err());
        assert!(dropout_apply(&x, -0.1, RngStream::new(1, 1), true).is_err());
    }

    #[test]
    fn kept_fraction_and_mean_obey_law_of_large_numbers() {
        let n = 1_000_000;
        let x = filled(1000, 1000, 1.0);
        let (y, mask) = dropout_apply(&x, 0.1, RngStream::new(9, 3), true).unwrap();
        let kept_frac = mask.kept() as f64 / n as f64;
        assert!(
            (kept_frac - 0.9).abs() < 0.002,
            "kept fraction {kept_frac} outside 0.9 +/- 0.002"
        );
        // Inverted scaling keeps the sample mean at the input mean.
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "output mean {mean} drifted");
    }

    #[test]
    fn fixed_stream_is_bit_reproducible_and_streams_differ() {
        let x = filled(16, 16, 2.0);
        let (a, _) = dropout_apply(&x, 0.3, RngStream::new(5, 1), true).unwrap();
        let (b, _) = dropout_apply(&x, 0.3, RngStream::new(5, 1), true).unwrap();
        let (c, _) = dropout_apply(&x, 0.3, RngStream::new(5, 2), true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn backward_routes_through_mask() {
        let x = filled(4, 4, 1.0);
        let (_, mask) = dropout_apply(&x, 0.5, RngStream::new(11, 0), true).unwrap();
        let dy = filled(4, 4, 1.0);
        let dx = dropout_backward(&dy, &mask);
        for (g, s) in dx.data().iter().zip(&mask.scale) {
            assert_eq!(g, s);
        }
    }
}
