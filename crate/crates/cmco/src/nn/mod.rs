//! Dense-array numerics and differentiable layers.
//!
//! Everything here is plain `f64` on row-major buffers with hand-written
//! backward passes; there is no autodiff graph. Layers come in pairs of
//! `forward` (returning a cache of whatever the backward pass needs) and
//! `backward` (consuming the cache and producing input and parameter
//! gradients). All operations are pure given explicit RNG streams, so
//! concurrent evaluation on disjoint data is safe.

pub mod dense;
pub mod dropout;
pub mod grad_check;
pub mod gru;
pub mod layer_norm;
pub mod lstm;
pub mod matrix;
pub mod rng;

pub use dense::{Activation, Dense, DenseCache, DenseGrads};
pub use dropout::{dropout_apply, dropout_backward, DropoutMask};
pub use grad_check::{grad_check, indexed_names, GradCheckReport, GradCheckable, ParamEntry};
pub use gru::{GruGrads, GruLayer, GruSeqCache};
pub use layer_norm::{LayerNorm, LayerNormCache, LayerNormGrads};
pub use lstm::{LstmGrads, LstmLayer, LstmSeqCache};
pub use matrix::Matrix;
pub use rng::RngStream;
