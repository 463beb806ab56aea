//! Midpoint-radius enclosures in `f64` for the hot enumeration loops.
//!
//! A [`FastBall`] contains its true value as long as every operation inflates the
//! radius by its own rounding error. Radii are pushed up by a relative factor
//! and an absolute floor after every step, which over-covers the few ulps of
//! error incurred while computing the radius itself. Anything a ball cannot
//! decide is handed back to the exact path.

use crate::interval::Interval;

const U: f64 = f64::EPSILON * 0.5;
const TINY: f64 = f64::MIN_POSITIVE;

#[inline]
fn inflate(r: f64) -> f64 {
    r * (1.0 + 4.0 * f64::EPSILON) + TINY
}

#[inline]
fn round_down(x: f64) -> f64 {
    x - x.abs() * (2.0 * f64::EPSILON) - TINY
}

#[inline]
fn round_up(x: f64) -> f64 {
    x + x.abs() * (2.0 * f64::EPSILON) + TINY
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastBall {
    pub mid: f64,
    pub rad: f64,
}

/// Certified bounds `[lo, hi]` in `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn from_interval(iv: &Interval) -> Self {
        Bounds {
            lo: iv.lo_f64(),
            hi: iv.hi_f64(),
        }
    }

    /// Certified `self < other`; `None` when the bounds overlap.
    #[inline]
    pub fn lt(&self, other: &Bounds) -> Option<bool> {
        if self.hi < other.lo {
            Some(true)
        } else if self.lo >= other.hi {
            Some(false)
        } else {
            None
        }
    }
}

impl FastBall {
    pub const ZERO: FastBall = FastBall { mid: 0.0, rad: 0.0 };

    pub fn exact(x: f64) -> Self {
        FastBall { mid: x, rad: 0.0 }
    }

    pub fn from_interval(iv: &Interval) -> Self {
        let lo = iv.lo_f64();
        let hi = iv.hi_f64();
        let mid = 0.5 * lo + 0.5 * hi;
        let rad = inflate((hi - mid).max(mid - lo));
        FastBall { mid, rad }
    }

    #[inline]
    pub fn add(self, o: FastBall) -> FastBall {
        let mid = self.mid + o.mid;
        FastBall {
            mid,
            rad: inflate(self.rad + o.rad + U * mid.abs()),
        }
    }

    #[inline]
    pub fn sub(self, o: FastBall) -> FastBall {
        self.add(FastBall {
            mid: -o.mid,
            rad: o.rad,
        })
    }

    /// Multiplication by an integer of magnitude below `2^53`.
    #[inline]
    pub fn mul_int(self, k: i64) -> FastBall {
        let kf = k as f64;
        let mid = self.mid * kf;
        FastBall {
            mid,
            rad: inflate(self.rad * kf.abs() + U * mid.abs()),
        }
    }

    #[inline]
    pub fn mul(self, o: FastBall) -> FastBall {
        let mid = self.mid * o.mid;
        FastBall {
            mid,
            rad: inflate(
                self.mid.abs() * o.rad + o.mid.abs() * self.rad + self.rad * o.rad + U * mid.abs(),
            ),
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        round_down(self.mid - self.rad)
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        round_up(self.mid + self.rad)
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            lo: self.lo(),
            hi: self.hi(),
        }
    }

    /// Certified enclosure of the distance to the nearest integer.
    #[inline]
    pub fn nearest_int_dist(&self) -> Bounds {
        if !(self.mid.abs() < 4.0e15) || !self.rad.is_finite() {
            return Bounds { lo: 0.0, hi: 0.5 };
        }
        // mid - round(mid) is exact below 2^52.
        let f = (self.mid - self.mid.round()).abs();
        Bounds {
            lo: round_down(f - self.rad).max(0.0),
            hi: round_up(f + self.rad).min(0.5),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactReal;
    use proptest::prelude::*;

    #[test]
    fn nearest_int_of_two_sqrt2() {
        let s = FastBall::from_interval(&ExactReal::sqrt(2).eval_bits(100)).mul_int(2);
        let d = s.nearest_int_dist();
        assert!(d.lo > 0.17157287525 && d.hi < 0.17157287526);
        assert!(d.hi - d.lo < 1e-14);
    }

    proptest! {
        #[test]
        fn linear_combinations_enclose_exact_value(
            q in 1i64..2_000_000,
            p in 0i64..2_000_000,
            a in 1u64..50,
        ) {
            let r = ExactReal::sqrt(a).mul_rational(&rug::Rational::from((3, 7)));
            let b = FastBall::from_interval(&r.eval_bits(120));
            let fast = b.mul_int(q).add(b.mul_int(p));
            let exact = r.mul_i64(q + p).eval_bits(200);
            let d_fast = fast.nearest_int_dist();
            let d_exact = exact.nearest_int_dist_enclosure();
            prop_assert!(fast.lo() <= exact.lo_f64() && exact.hi_f64() <= fast.hi());
            prop_assert!(d_fast.lo <= d_exact.lo_f64() && d_exact.hi_f64() <= d_fast.hi);
        }
    }
}
