//! Counter-based randomness: values that must be a pure function of
//! (seed, link, tti, ...) are derived by hashing the key instead of
//! advancing a stream, so evaluation order never matters.

const KEY_INIT: u64 = 0x243F_6A88_85A3_08D3;

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn hash_key(parts: &[u64]) -> u64 {
    parts.iter().fold(KEY_INIT, |h, &p| mix64(h ^ p))
}

/// Uniform in [0, 1) from the top 53 bits.
#[inline]
pub(crate) fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stream tags so independent consumers of the same seed never collide.
pub(crate) mod stream {
    pub const DEPLOY: u64 = 0x01;
    pub const SHADOW: u64 = 0x02;
    pub const FADING: u64 = 0x03;
    pub const ACK: u64 = 0x04;
    pub const INTERFERER_PMI: u64 = 0x05;
}
