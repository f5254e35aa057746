//! Seeded pseudo-random numbers.
//!
//! Every stochastic step in the pipeline (k-means++ seeding, weight init,
//! shuffles, synthetic scenes) draws from [`SeededRng`], a xoshiro256++
//! generator whose 256-bit state is expanded from a single `u64` seed with
//! SplitMix64. Both algorithms are fixed-width integer arithmetic, so a seed
//! produces the same stream on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub const DEFAULT_SEED: u64 = 42;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}
