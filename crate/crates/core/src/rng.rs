//! Counter-based deterministic random numbers.
//!
//! The solver needs per-agent, per-step noise (preferred-velocity jitter,
//! degenerate-contact tie-breaks) that is bitwise reproducible across runs,
//! platforms, and thread counts. A stateless hash of (seed, stream, counter)
//! gives every agent its own logical stream with no mutable RNG state to
//! sequence between threads.

use crate::math::Vec2;

/// SplitMix64 finalizer. Good avalanche, stable across platforms.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash three words into one.
#[inline]
pub fn hash3(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(seed ^ splitmix64(a ^ splitmix64(b)))
}

/// Map a hash to a uniform f64 in [0, 1).
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    // 53 high bits -> [0, 1)
    (h >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform sample in [lo, hi).
#[inline]
pub fn uniform(h: u64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(h)
}

/// Deterministic unit vector for a degenerate (coincident-center) agent pair,
/// keyed on the unordered pair so both agents derive the same axis.
pub fn pair_tiebreak_direction(i: usize, j: usize) -> Vec2 {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let h = hash3(0x7478_6272_6561_6b73, lo as u64, hi as u64);
    let theta = std::f64::consts::TAU * unit_f64(h);
    Vec2::new(theta.cos(), theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        assert_eq!(hash3(1, 2, 3), hash3(1, 2, 3));
        assert_ne!(hash3(1, 2, 3), hash3(1, 3, 2));
        assert_ne!(hash3(0, 2, 3), hash3(1, 2, 3));
    }

    #[test]
    fn unit_range() {
        for k in 0..1000 {
            let u = unit_f64(splitmix64(k));
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn tiebreak_is_symmetric_unit() {
        let d = pair_tiebreak_direction(4, 9);
        assert_eq!(d, pair_tiebreak_direction(9, 4));
        assert!((d.norm() - 1.0).abs() < 1e-12);
    }
}
