//! Deterministic random streams for the replication harness.
//!
//! Each replication owns a counter-based ChaCha stream seeded positionally
//! from `(base_seed, replication index, dgp id)`, so results do not depend on
//! how replications are scheduled across workers. Standard normals come from
//! the fixed inverse-CDF in [`crate::stats`] applied to open-interval
//! uniforms, keeping draws bit-identical across platforms and dependency
//! versions.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::stats::inv_norm_cdf;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Positional seed for one replication stream.
pub fn derive_seed(base_seed: u64, replication: u64, stream: u64) -> u64 {
    mix(mix(base_seed ^ mix(stream)) ^ replication)
}

/// A deterministic standard-normal source.
pub struct NormalSource {
    rng: ChaCha8Rng,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_open_uniform(&mut self) -> f64 {
        // 53 random bits, offset by half a step: never exactly 0 or 1.
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard_normal(&mut self) -> f64 {
        inv_norm_cdf(self.next_open_uniform())
    }
}
