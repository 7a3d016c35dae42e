//! Seeded random streams.
//!
//! Every consumer draws from a ChaCha8 stream selected by (seed, stream id),
//! so adding a class or changing one class size leaves the other streams
//! untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TRAIN: u64 = 1 << 32;
pub(crate) const TEST: u64 = 2 << 32;
pub(crate) const MONTE_CARLO: u64 = 3 << 32;
pub(crate) const FRAME: u64 = 4 << 32;
pub(crate) const SUBSAMPLE: u64 = 5 << 32;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// SplitMix64 finaliser, used to derive child seeds from (parent, index).
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
