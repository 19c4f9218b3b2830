//! Counter-based random streams.
//!
//! Every random quantity in the crate comes from a stream keyed by
//! `(master_seed, domain, index)`. The key selects a ChaCha8 seed and
//! stream id, so the value of draw `b` never depends on which thread made
//! it or on what was drawn before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes that consume randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Weights = 0x5745_4947_4854_5301,
    WeightsRetry = 0x5745_4947_4854_5302,
    Folds = 0x464f_4c44_5300_0001,
    Resample = 0x5245_5341_4d50_4c01,
    SimData = 0x5349_4d44_4154_4101,
    Method = 0x4d45_5448_4f44_0001,
}

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. one per replicate or per method.
pub fn derive_seed(master_seed: u64, domain: Domain, index: u64) -> u64 {
    mix64(mix64(master_seed ^ domain as u64) ^ mix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn stream(master_seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(master_seed ^ domain as u64));
    rng.set_stream(index);
    rng
}
