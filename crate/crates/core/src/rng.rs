//! Reproducible random streams.
//!
//! All randomness in the crate comes from SplitMix64 (Steele, Lea & Flood):
//! the state advances by `0x9E3779B97F4A7C15` and each output is the state
//! passed through the mixer `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//! z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`.
//!
//! Uniform doubles in `[0, 1)` take the top 53 bits of an output.
//! Standard Gaussians come from the Box–Muller transform on two uniforms
//! `u1 = 1 - next_f64()` (so `u1 ∈ (0, 1]`) and `u2 = next_f64()`, producing
//! `sqrt(-2 ln u1) cos(2π u2)` first and `sqrt(-2 ln u1) sin(2π u2)` on the
//! following call.

use std::f64::consts::TAU;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
    spare_gaussian: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            state: seed,
            spare_gaussian: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[-a, a]`.
    pub fn symmetric(&mut self, a: f64) -> f64 {
        a * (2.0 * self.next_f64() - 1.0)
    }

    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        self.spare_gaussian = Some(r * (TAU * u2).sin());
        r * (TAU * u2).cos()
    }
}
