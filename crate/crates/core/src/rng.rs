//! Seed handling. Every stochastic routine takes an explicit seed and builds
//! its own ChaCha stream so results do not depend on call order or threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from a parent seed and a path of integer labels.
/// Stable across platforms and releases.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Round half away from zero for nonnegative inputs, tolerant of the
/// representation error in products like `0.3 * 9105`.
pub fn round_half_up(x: f64) -> usize {
    debug_assert!(x >= 0.0);
    (x + 0.5 + 1e-9).floor() as usize
}
