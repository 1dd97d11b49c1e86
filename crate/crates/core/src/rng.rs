//! Deterministic seed derivation for sweep substreams.
//!
//! Every (point, trial, strategy) task gets its own ChaCha12 stream whose
//! seed is derived from the master seed by a fixed splitmix64 chain:
//!
//! ```text
//! s0 = splitmix64(master ^ (0x9E3779B97F4A7C15 * (point + 1)))
//! s1 = splitmix64(s0     ^ (0xBF58476D1CE4E5B9 * (trial + 1)))
//! s2 = splitmix64(s1     ^ (0x94D049BB133111EB * (strategy + 1)))
//! ```
//!
//! The result is independent of evaluation order, so serial and parallel
//! sweeps produce identical streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One splitmix64 step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Substream seed for a (point, trial, strategy) task.
pub fn substream_seed(master: u64, point: u64, trial: u64, strategy: u64) -> u64 {
    let s0 = splitmix64(master ^ 0x9E3779B97F4A7C15u64.wrapping_mul(point.wrapping_add(1)));
    let s1 = splitmix64(s0 ^ 0xBF58476D1CE4E5B9u64.wrapping_mul(trial.wrapping_add(1)));
    splitmix64(s1 ^ 0x94D049BB133111EBu64.wrapping_mul(strategy.wrapping_add(1)))
}

/// The crate's reproducible generator.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
