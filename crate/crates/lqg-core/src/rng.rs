//! Deterministic RNG streams.
//!
//! Every stochastic routine takes an explicit `u64` seed and derives a
//! ChaCha8 generator from it. Embarrassingly-parallel loops (Monte Carlo
//! paths, independent samples) give each work item its own counter-mode
//! stream, so results are identical no matter how the items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root generator for a seed.
pub fn master(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `seed` (per-path / per-sample RNG).
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = master(seed);
    rng.set_stream(index);
    rng
}
