//! Deterministic seed derivation.
//!
//! Every randomized routine takes a `u64` master seed. Child seeds (per tree,
//! per restart, per Monte-Carlo trajectory) are derived with the splitmix64
//! finalizer so that results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `master` within namespace `stream`.
///
/// `derive(m, s, i)` is `splitmix64(splitmix64(m ^ splitmix64(s)) + i)`, so
/// distinct namespaces never collide for the same index.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)).wrapping_add(index))
}

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Namespaces used by the library. Keeping them in one place avoids
/// accidental reuse of a stream by two consumers.
pub mod streams {
    pub const TREE: u64 = 1;
    pub const RESTART: u64 = 2;
    pub const QUERY_FALLBACK: u64 = 3;
    pub const TEST_SET: u64 = 4;
    pub const VOLUME: u64 = 5;
    pub const PAIR: u64 = 6;
    pub const TRAJECTORY: u64 = 7;
    pub const TRAJECTORY_NOISE: u64 = 8;
    pub const DIAGNOSIS: u64 = 9;
    pub const ACTIVE_ROUND: u64 = 10;
    pub const TRAINING: u64 = 11;
    pub const SWEEP: u64 = 12;
    pub const PHM_RUN: u64 = 13;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference splitmix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(GOLDEN_GAMMA), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_do_not_collide() {
        let a = derive(7, streams::TREE, 0);
        let b = derive(7, streams::RESTART, 0);
        let c = derive(7, streams::TREE, 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive(7, streams::TREE, 0));
    }
}
