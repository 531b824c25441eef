//! Seeded, splittable RNG streams.
//!
//! A [`RngStream`] is a `(seed, stream_id)` pair backed by ChaCha8. Identical
//! pairs always yield the identical value sequence; distinct stream ids under
//! the same seed select statistically independent keystreams. Dropout masks,
//! weight initialization, shuffling, and data generation each draw from their
//! own stream id space so no consumer perturbs another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifier of one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// A sibling stream under the same seed.
    pub fn with_stream(&self, stream_id: u64) -> Self {
        RngStream { seed: self.seed, stream_id }
    }

    /// Instantiate the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Stream-id spaces. Keeping these disjoint means each consumer owns a
/// namespace under the run seed and new consumers cannot collide with
/// existing ones.
pub mod domains {
    /// Weight initialization (one stream per model build).
    pub const INIT: u64 = 1 << 32;
    /// Dropout masks drawn during training (offset by a per-call counter).
    pub const TRAIN_DROPOUT: u64 = 2 << 32;
    /// Mini-batch shuffling (offset by epoch).
    pub const SHUFFLE: u64 = 3 << 32;
    /// MC-dropout inference passes (offset by pass index).
    pub const MC_PASS: u64 = 4 << 32;
    /// Synthetic dataset generation (offset by sample index).
    pub const TASK_GEN: u64 = 5 << 32;
}
