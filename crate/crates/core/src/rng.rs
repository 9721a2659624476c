//! Deterministic random-number streams.
//!
//! Every stochastic routine in the crate draws from a ChaCha8 generator that
//! is keyed by a user-supplied root seed and a stream index. Work item `k`
//! always receives stream `k` regardless of how many threads execute the
//! batch, so results are bit-identical across thread counts and across runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for one work item of a batch.
///
/// `seed` selects the overall experiment; `stream` selects the item within
/// it (scan index, trial index, frame index, ...). Distinct `(seed, stream)`
/// pairs yield statistically independent sequences.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
