//! Counter-based random numbers.
//!
//! Every normal variate is a pure function of `(master_seed, path_index,
//! step, component)`, so results never depend on generation order or on
//! how paths are distributed over workers. Uniforms come from the
//! SplitMix64 output function applied to a keyed counter; normals are
//! obtained by inversion, `z = -sqrt(2) * erfc^{-1}(2u)`.

use statrs::function::erf::erfc_inv;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit key from a parent key and a label.
#[inline]
pub fn derive_key(parent: u64, label: u64) -> u64 {
    mix64(mix64(parent ^ 0x5851_F42D_4C95_7F2D).wrapping_add(label.wrapping_mul(GOLDEN)))
}

/// Stream of uniforms and normals addressed by counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        Self {
            key: derive_key(master_seed, stream),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Sub-stream with an independent key.
    pub fn substream(&self, label: u64) -> Self {
        Self {
            key: derive_key(self.key, label),
        }
    }

    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate by inversion of the uniform at `counter`.
    #[inline]
    pub fn normal(&self, counter: u64) -> f64 {
        inverse_normal_cdf(self.uniform(counter))
    }
}

/// Quantile function of the standard normal distribution.
#[inline]
pub fn inverse_normal_cdf(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}
