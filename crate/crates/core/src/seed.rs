//! Seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] keyed by a `u64`
//! derived from a master seed and a path of stream labels. The mix is a
//! chained SplitMix64 finalizer:
//!
//! ```text
//! h0 = splitmix64(master)
//! h_{i+1} = splitmix64(h_i ^ splitmix64(label_i + GOLDEN * (i + 1)))
//! ```
//!
//! Adding a new stream (say a new trial index) therefore never perturbs the
//! seeds of existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream labels used across the crate. Values are arbitrary but frozen.
pub mod stream {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const SMOTE: u64 = 0x534d_4f54;
    pub const INIT: u64 = 0x494e_4954;
    pub const SHUFFLE: u64 = 0x5348_5546;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const TRIAL: u64 = 0x5452_4941;
    pub const PROPORTION: u64 = 0x5052_4f50;
    pub const MODEL: u64 = 0x4d4f_4445;
    pub const MEMBER: u64 = 0x4d45_4d42;
    pub const EPOCH: u64 = 0x4550_4f43;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a path of labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .enumerate()
        .fold(splitmix64(master), |h, (i, &label)| {
            splitmix64(h ^ splitmix64(label.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))))
        })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
