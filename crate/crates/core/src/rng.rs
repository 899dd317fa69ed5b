//! Stateless random stream derivation.
//!
//! Every Monte Carlo sample owns a generator seeded from a hash of
//! `(seed, pixel, sample, stream)`, so results never depend on how work is
//! split across threads.

use rand::SeedableRng;
pub use rand_pcg::Pcg32;

/// Stream used for sub-pixel jitter of primary rays.
pub const STREAM_CAMERA: u64 = 0;
/// Stream used for shading (light sampling, BSDF sampling, roulette).
pub const STREAM_SHADING: u64 = 1;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a list of words.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |h, &w| splitmix64(h ^ splitmix64(w)))
}

/// Generator for one sample of one pixel.
#[inline]
pub fn sample_rng(seed: u64, pixel: u64, sample: u64, stream: u64) -> Pcg32 {
    let state = hash_words(&[seed, pixel, sample]);
    Pcg32::new(state, splitmix64(stream) | 1)
}

/// Generator for a coarser task (scene randomization, camera placement).
pub fn task_rng(words: &[u64]) -> Pcg32 {
    Pcg32::seed_from_u64(hash_words(words))
}
