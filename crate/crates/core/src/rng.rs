//! Seeded random streams.
//!
//! A run has one root seed. Every consumer draws from its own ChaCha8
//! stream, obtained by seeding `ChaCha8Rng` with the root seed and selecting
//! the stream number from [`Stream`]. Streams never overlap, so e.g. changing
//! the batch size does not perturb the generated dataset.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Synthetic datasets and problem matrices.
    Data = 0,
    /// Mini-batch index sampling.
    Batch = 1,
    /// Uniform output selection in SAM-VR.
    VrOutput = 2,
    /// Initial iterate.
    Init = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// `n` distinct indices from `0..total`, sorted ascending. `n >= total`
/// returns all indices without consuming randomness.
pub fn sample_batch(rng: &mut ChaCha8Rng, total: usize, n: usize) -> Vec<usize> {
    if n >= total {
        return (0..total).collect();
    }
    let mut idx = index::sample(rng, total, n).into_vec();
    idx.sort_unstable();
    idx
}
