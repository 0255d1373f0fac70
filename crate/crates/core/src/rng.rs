//! Seed derivation.
//!
//! Every random stream is derived from a single master seed plus a named
//! stream tag and a counter, never from execution order. Adding a new
//! stream therefore never perturbs an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams. The discriminant is part of the derivation, so
/// existing values must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Partition = 1,
    Init = 2,
    Generator = 3,
    GridCell = 4,
    AuditRepeat = 5,
    Shuffle = 6,
    Folds = 7,
}

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// `derive_seed(master, stream, counter)` = splitmix64(splitmix64(master ^ tag) ^ counter)
/// with `tag = stream as u64 * 0x1000_0000_0000_0001`.
pub fn derive_seed(master: u64, stream: Stream, counter: u64) -> u64 {
    let tag = (stream as u64).wrapping_mul(0x1000_0000_0000_0001);
    splitmix64(splitmix64(master ^ tag) ^ counter)
}

pub fn rng_for(master: u64, stream: Stream, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, counter))
}
