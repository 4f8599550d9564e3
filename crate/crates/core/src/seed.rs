//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha generator whose seed is
//! derived from the master seed and a path of integers (split tag, sample
//! index, epoch, ...). Sample `i` can therefore be regenerated without
//! touching samples `0..i`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Distinct tags never collide for the same master seed.
pub mod tag {
    pub const TRAIN: u64 = 0x7472_6169_6e00;
    pub const TEST: u64 = 0x7465_7374_0000;
    pub const INIT: u64 = 0x696e_6974;
    pub const SHUFFLE: u64 = 0x7368_7566;
    pub const SSL_SHUFFLE: u64 = 0x7373_6c73;
    pub const AUGMENT: u64 = 0x6175_676d;
    pub const SUBSET: u64 = 0x7375_6273;
    pub const BENCH: u64 = 0x6265_6e63;
    pub const DEPLOY: u64 = 1;
    pub const CHANNEL: u64 = 2;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of stream identifiers.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(master: u64, path: &[u64]) -> Rng {
    rng(derive(master, path))
}
