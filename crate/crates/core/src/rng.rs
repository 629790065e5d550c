//! Deterministic stream derivation.
//!
//! Every random quantity in a replication is drawn from a ChaCha stream keyed
//! by what it describes (an IU's traffic chain, a link at a given slot epoch),
//! not by the order in which the router happens to ask for it. Two routing
//! variants run on the same replication therefore see the same channels and
//! the same traffic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `tags` into `seed`, order-sensitively.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(seed), |acc, &t| mix64(acc ^ mix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tags))
}

// Stream domains.
pub(crate) const TAG_TOPOLOGY: u64 = 1;
pub(crate) const TAG_TRAFFIC: u64 = 2;
pub(crate) const TAG_LINK: u64 = 3;
pub(crate) const TAG_VECTOR: u64 = 4;
pub(crate) const TAG_MATRIX: u64 = 5;
