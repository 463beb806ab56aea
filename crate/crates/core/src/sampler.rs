//! Seeded jittered-grid sampling of a ball with 256-bit dyadic jitter.
//!
//! Each sample owns a ChaCha stream selected by its index, so results do not
//! depend on how samples are split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::exact::ExactReal;
use crate::subspace::Ball;

pub const JITTER_BITS: u32 = 256;

#[derive(Clone, Copy, Debug)]
pub struct Sampler {
    pub seed: u64,
    /// Grid cells per axis; the sample count is `per_axis^n`.
    pub per_axis: u64,
}

impl Sampler {
    pub fn new(seed: u64, per_axis: u64) -> Self {
        Sampler { seed, per_axis: per_axis.max(1) }
    }

    /// Smallest grid with at least `samples` cells in dimension `n`.
    pub fn with_at_least(seed: u64, samples: u64, n: usize) -> Self {
        let mut m = (samples as f64).powf(1.0 / n as f64).floor() as u64;
        while m.pow(n as u32) < samples {
            m += 1;
        }
        Sampler::new(seed, m)
    }

    pub fn count(&self, n: usize) -> u64 {
        self.per_axis.pow(n as u32)
    }

    /// Uniform dyadic in `[0,1)` with `JITTER_BITS` bits, from stream `index`.
    pub fn jitter(&self, index: u64, coord: usize) -> Rational {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng.set_word_pos(coord as u128 * 16);
        let mut num = Integer::new();
        for _ in 0..JITTER_BITS / 64 {
            num <<= 64;
            num += rng.next_u64();
        }
        Rational::from((num, Integer::from(1) << JITTER_BITS))
    }

    /// Sample `index` of the grid over `ball`.
    pub fn point(&self, ball: &Ball, index: u64) -> Vec<Rational> {
        let n = ball.dim();
        let m = self.per_axis;
        let side = Rational::from(&ball.radius * 2u32);
        let mut rest = index;
        (0..n)
            .map(|j| {
                let cell = rest % m;
                rest /= m;
                let u = self.jitter(index, j) + cell;
                let c = ball.center[j].as_rational().expect("sampling needs a rational ball centre");
                c - &ball.radius + Rational::from(&side * u) / m
            })
            .collect()
    }

    pub fn exact_point(&self, ball: &Ball, index: u64) -> Vec<ExactReal> {
        self.point(ball, index).iter().map(ExactReal::from_rational).collect()
    }
}

/// Wilson score interval at 95% confidence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub total: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(hits: u64, total: u64) -> Self {
        if total == 0 {
            return Proportion { hits, total, fraction: 0.0, ci_low: 0.0, ci_high: 1.0 };
        }
        let z = 1.959_963_984_540_054_f64;
        let nf = total as f64;
        let p = hits as f64 / nf;
        let z2 = z * z;
        let den = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / den;
        let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
        Proportion {
            hits,
            total,
            fraction: p,
            ci_low: (centre - half).max(0.0),
            ci_high: (centre + half).min(1.0),
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_fall_in_their_cells() {
        let ball = Ball::unit(2);
        let s = Sampler::new(7, 10);
        for i in [0u64, 13, 99] {
            let p = s.point(&ball, i);
            let cell = [i % 10, i / 10];
            for j in 0..2 {
                let lo = Rational::from((cell[j] as i64, 10));
                let hi = Rational::from((cell[j] as i64 + 1, 10));
                assert!(p[j] >= lo && p[j] < hi);
                assert!(p[j].denom().significant_bits() > 200);
            }
        }
    }

    #[test]
    fn streams_are_index_local() {
        let a = Sampler::new(1, 100);
        assert_eq!(a.jitter(5, 0), a.jitter(5, 0));
        assert_ne!(a.jitter(5, 0), a.jitter(6, 0));
        assert_ne!(a.jitter(5, 0), a.jitter(5, 1));
    }

    #[test]
    fn wilson_interval() {
        let p = Proportion::new(50, 100);
        assert!((p.ci_low - 0.4038).abs() < 1e-3 && (p.ci_high - 0.5962).abs() < 1e-3);
        let z = Proportion::new(0, 10_000);
        assert_eq!(z.ci_low, 0.0);
        assert!(z.ci_high < 4e-4);
    }

    #[test]
    fn grid_size() {
        assert_eq!(Sampler::with_at_least(0, 10_000, 2).per_axis, 100);
        assert_eq!(Sampler::with_at_least(0, 10_001, 2).per_axis, 101);
        assert_eq!(Sampler::with_at_least(0, 1000, 1).count(1), 1000);
    }
}
