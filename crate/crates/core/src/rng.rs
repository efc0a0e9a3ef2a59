//! Deterministic counter-based random number generation.
//!
//! Replication streams are derived as pure functions of
//! `(seed, grid index, rep index)`, so a simulation sliced across any
//! number of workers produces bitwise-identical output.  Normal variates
//! use the inverse CDF, which keeps stream consumption fixed at one
//! uniform per draw.  Not cryptographically secure.

use crate::numeric::normal_quantile;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 sequence generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream keyed by a seed and two counters; used per (grid, rep).
    pub fn from_counters(seed: u64, c1: u64, c2: u64) -> Self {
        let s = mix(seed ^ mix(c1.wrapping_add(1).wrapping_mul(GOLDEN)))
            ^ mix(c2.wrapping_add(2).wrapping_mul(GOLDEN));
        Self { state: mix(s) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        // 53 random bits, offset by half an ulp so 0 and 1 are excluded.
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw by inverse CDF (one uniform consumed).
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        normal_quantile(self.next_f64())
    }
}
