//! Counter-based seeding. Every random decision in the simulator is keyed on
//! the tuple of integers that identifies it, so results never depend on the
//! order in which clients are visited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep independent random streams apart even when their
/// numeric keys collide.
pub mod domain {
    pub const NEIGHBOR_SAMPLE: u64 = 0x6e65_6967;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const CLIENT_SAMPLE: u64 = 0x636c_6e74;
    pub const CONTACT: u64 = 0x636f_6e74;
    pub const INIT: u64 = 0x696e_6974;
    pub const SYNTH: u64 = 0x7379_6e74;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key tuple into a single 64-bit value.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

/// Uniform draw in [0, 1) from a key tuple, without building a full RNG.
pub fn unit_f64(parts: &[u64]) -> f64 {
    (mix(parts) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_is_order_sensitive() {
        assert_ne!(mix(&[1, 2]), mix(&[2, 1]));
        assert_eq!(mix(&[7, 8, 9]), mix(&[7, 8, 9]));
    }

    #[test]
    fn unit_in_range() {
        for i in 0..1000 {
            let u = unit_f64(&[i, 3]);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
