//! Counter-style keyed random streams.
//!
//! Every random decision in the crate is drawn from a ChaCha stream whose seed
//! is a hash of an explicit key tuple (run seed, tree index, node index, ...).
//! Two call sites with the same key see the same stream regardless of the
//! order or thread they run on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type KeyedRng = ChaCha8Rng;

/// splitmix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes an ordered key tuple into one 64-bit seed.
pub fn key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn keyed_rng(parts: &[u64]) -> KeyedRng {
    ChaCha8Rng::seed_from_u64(key(parts))
}

/// FNV-1a, used to give feature columns a stable identity derived from their name.
pub fn name_key(name: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

// Stream tags keep unrelated consumers of the same seed apart.
pub(crate) const TAG_BOOTSTRAP: u64 = 0xB007;
pub(crate) const TAG_NODE: u64 = 0x70DE;
pub(crate) const TAG_SMO: u64 = 0x5A0;
pub(crate) const TAG_SPLIT: u64 = 0x5B11;
pub(crate) const TAG_SMOTE: u64 = 0x5307E;
pub(crate) const TAG_FOLD: u64 = 0xF01D;
pub(crate) const TAG_SEARCH: u64 = 0x5EA7C;
pub(crate) const TAG_SYNTH: u64 = 0x5717;
