//! Deterministic random substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream identified by
//! `(seed, trial, purpose, index)`:
//!
//! 1. the 64-bit key is `splitmix64(seed ^ splitmix64(trial ^ splitmix64(purpose)))`,
//! 2. the generator is `ChaCha8Rng::seed_from_u64(key)` with `set_stream(index)`,
//! 3. uniforms are `(next_u64 >> 11) * 2^-53` in `[0, 1)`,
//! 4. a unit-variance circularly-symmetric complex Gaussian consumes two
//!    uniforms `u1, u2` (in that order) and is
//!    `sqrt(-ln(1 - u1)) * (cos 2*pi*u2 + i sin 2*pi*u2)`.
//!
//! Geometry uses purpose [`Purpose::Drop`] with index 0. Fading on the link
//! from BS `l` to UE `k` of cell `j` uses purpose [`Purpose::Fading`] with index
//! `(l * L + j) * K + k`; the `N` entries of `w` are drawn first, then the `N`
//! entries of `q`.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Drop,
    Fading,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Drop => 0x6472_6f70,
            Purpose::Fading => 0x6661_6465,
        }
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A family of independent streams for one `(seed, trial, purpose)`.
#[derive(Debug, Clone, Copy)]
pub struct Substreams {
    key: u64,
}

impl Substreams {
    pub fn new(seed: u64, trial: u64, purpose: Purpose) -> Self {
        let key = splitmix64(seed ^ splitmix64(trial ^ splitmix64(purpose.tag())));
        Substreams { key }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(index);
        rng
    }
}

pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn complex_gaussian<R: RngCore>(rng: &mut R) -> Complex64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    let r = (-(1.0 - u1).ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    Complex64::new(r * c, r * s)
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = Substreams::new(42, 3, Purpose::Fading);
        let a: Vec<u64> = (0..4).map(|_| s.stream(7).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut x = s.stream(7);
        let mut y = s.stream(8);
        assert_ne!(x.next_u64(), y.next_u64());
        let mut z = Substreams::new(42, 4, Purpose::Fading).stream(7);
        assert_ne!(s.stream(7).next_u64(), z.next_u64());
        let mut d = Substreams::new(42, 3, Purpose::Drop).stream(7);
        assert_ne!(s.stream(7).next_u64(), d.next_u64());
    }

    #[test]
    fn complex_gaussian_moments() {
        let mut rng = Substreams::new(1, 0, Purpose::Fading).stream(0);
        let n = 200_000;
        let mut m2 = 0.0;
        let mut mean = Complex64::new(0.0, 0.0);
        let mut pseudo = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let z = complex_gaussian(&mut rng);
            m2 += z.norm_sqr();
            mean += z;
            pseudo += z * z;
        }
        let n = n as f64;
        // E|z|^2 = 1 has variance 1 per draw
        assert!((m2 / n - 1.0).abs() < 5.0 / n.sqrt());
        assert!((mean / n).norm() < 5.0 / n.sqrt());
        assert!((pseudo / n).norm() < 5.0 * 2f64.sqrt() / n.sqrt());
    }

    #[test]
    fn uniform_range() {
        let mut rng = Substreams::new(9, 9, Purpose::Drop).stream(0);
        for _ in 0..10_000 {
            let u = uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
