//! Sequence-to-field operator learning with calibrated uncertainty.
//!
//! The pipeline implemented here trains a branch/trunk operator network on
//! sequence-to-field regression tasks, converts the trained network into a
//! stochastic ensemble by keeping dropout active at inference time, and
//! calibrates the ensemble spread with split conformal prediction so that the
//! reported per-location intervals carry a distribution-free coverage
//! guarantee.
//!
//! Module map:
//!
//! - [`nn`] — dense-array numerics: matrices, seeded RNG streams, dense /
//!   GRU / LSTM / layer-norm / dropout layers with hand-written backward
//!   passes, and a finite-difference gradient checker.
//! - [`deeponet`] — assembles a recurrent branch and a dense trunk into the
//!   inner-product operator `G(u)(r) = b(u) · t(r) + bias`.
//! - [`train`] — normalization, MSE loss, Adam, plateau LR decay, and the
//!   deterministic training loop.
//! - [`tasks`] — synthetic, oracle-solvable dataset generators plus dataset
//!   splitting and the on-disk dataset container.
//! - [`uq`] — MC-dropout ensembling, conformal calibration, interval
//!   construction, and coverage diagnostics.

pub mod data;
pub mod deeponet;
pub mod error;
pub mod io_util;
pub mod nn;
pub mod tasks;
pub mod train;
pub mod uq;

pub use error::{CmcoError, Result};
