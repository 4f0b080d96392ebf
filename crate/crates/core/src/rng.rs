//! Reproducible random streams.
//!
//! Every replicate draws from its own ChaCha stream keyed by the master seed.
//! ChaCha is counter based, so stream `r` is the same sequence no matter which
//! thread evaluates it or in which order replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Identifies one stream: a master seed plus a stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub index: u64,
}

impl StreamId {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    /// Stream for replicate `rep` of block `block` (one block per swept parameter).
    pub fn for_replicate(seed: u64, block: u32, rep: u32) -> Self {
        Self::new(seed, ((block as u64) << 32) | rep as u64)
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

pub type StreamRng = ChaCha12Rng;
