//! Seed derivation and counter-based per-site hashing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of the counter-based stream `(seed, tag, lane)`.
pub fn stream_key(seed: u64, tag: u64, lane: u64) -> u64 {
    let h = mix64(seed.wrapping_add(GOLDEN.wrapping_mul(tag.wrapping_add(1))));
    mix64(h ^ lane.wrapping_mul(0xD6E8_FEB8_6659_FD93).wrapping_add(0x2545_F491_4F6C_DD1D))
}

/// Word `index` of a keyed stream (a splitmix sequence started at `key`).
#[inline]
pub fn keyed_word(key: u64, index: i64) -> u64 {
    mix64(key.wrapping_add((index as u64).wrapping_mul(GOLDEN)))
}

/// Deterministic 64-bit word for `(seed, tag, index, lane)`.
#[inline]
pub fn site_word(seed: u64, tag: u64, index: i64, lane: u64) -> u64 {
    keyed_word(stream_key(seed, tag, lane), index)
}

/// Uniform in the open interval (0, 1).
#[inline]
pub fn unit_open(w: u64) -> f64 {
    ((w >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

pub fn derive_seed(root: u64, lane: u64, index: u64) -> u64 {
    site_word(root, 0x5EED, index as i64, lane)
}

pub const LANE_ENV: u64 = 1;
pub const LANE_WALK: u64 = 2;
pub const LANE_AUX: u64 = 3;

pub fn walk_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(seed >> 32);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_differ_by_every_coordinate() {
        let base = site_word(1, 2, 3, 4);
        assert_ne!(base, site_word(2, 2, 3, 4));
        assert_ne!(base, site_word(1, 3, 3, 4));
        assert_ne!(base, site_word(1, 2, -3, 4));
        assert_ne!(base, site_word(1, 2, 3, 5));
    }

    #[test]
    fn unit_open_bounds() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
    }

    #[test]
    fn site_uniforms_look_uniform() {
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| unit_open(site_word(7, 1, i, 0))).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
    }
}
