//! Certified real intervals over MPFR floats with outward rounding.
//!
//! Every operation rounds the lower endpoint down and the upper endpoint up,
//! so the true value of any expression built from these operations is always
//! contained in the result.

use std::cmp::Ordering;
use std::fmt;

use rug::float::{Constant, Round};
use rug::{Float, Integer, Rational};

/// A closed interval `[lo, hi]` with MPFR endpoints.
#[derive(Clone, PartialEq)]
pub struct Interval {
    lo: Float,
    hi: Float,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo_f64(), self.hi_f64())
    }
}

fn down<T>(prec: u32, v: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Down).0
}

fn up<T>(prec: u32, v: T) -> Float
where
    Float: rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Up).0
}

impl Interval {
    /// Builds `[lo, hi]`. Panics if `lo > hi` or either endpoint is NaN.
    pub fn new(lo: Float, hi: Float) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    pub fn point(x: Float) -> Self {
        Interval {
            lo: x.clone(),
            hi: x,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        Self::point(Float::with_val(53, x))
    }

    pub fn from_f64_bounds(lo: f64, hi: f64) -> Self {
        Self::new(Float::with_val(53, lo), Float::with_val(53, hi))
    }

    pub fn from_integer(x: &Integer, prec: u32) -> Self {
        Interval {
            lo: down(prec, x),
            hi: up(prec, x),
        }
    }

    pub fn from_i64(x: i64, prec: u32) -> Self {
        Self::from_integer(&Integer::from(x), prec)
    }

    pub fn from_rational(x: &Rational, prec: u32) -> Self {
        Interval {
            lo: down(prec, x),
            hi: up(prec, x),
        }
    }

    /// Enclosure of `sqrt(n)` for a non-negative integer.
    pub fn sqrt_integer(n: &Integer, prec: u32) -> Self {
        assert!(*n >= 0, "sqrt of negative integer");
        let mut lo = down(prec, n);
        lo.sqrt_round(Round::Down);
        let mut hi = up(prec, n);
        hi.sqrt_round(Round::Up);
        Interval { lo, hi }
    }

    pub fn pi(prec: u32) -> Self {
        Interval {
            lo: down(prec, Constant::Pi),
            hi: up(prec, Constant::Pi),
        }
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64_round(Round::Down)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64_round(Round::Up)
    }

    pub fn mid_f64(&self) -> f64 {
        let m = Float::with_val(self.prec(), &self.lo + &self.hi) / 2u32;
        m.to_f64()
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    /// Upper bound on `hi - lo`.
    pub fn width(&self) -> Float {
        up(self.prec(), &self.hi - &self.lo)
    }

    /// True when the width is at most `2^-bits`.
    pub fn width_at_most_pow2(&self, bits: u32) -> bool {
        let w = self.width();
        if w.is_zero() {
            return true;
        }
        let limit = Float::with_val(64, 1u32) >> bits;
        w <= limit
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_rational(&self, x: &Rational) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0
    }

    /// Certified sign: `Some` only when the interval excludes zero or is exactly zero.
    pub fn sign(&self) -> Option<Ordering> {
        if self.lo > 0 {
            Some(Ordering::Greater)
        } else if self.hi < 0 {
            Some(Ordering::Less)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Certified `self < other`.
    pub fn lt(&self, other: &Interval) -> Option<bool> {
        if self.hi < other.lo {
            Some(true)
        } else if self.lo >= other.hi {
            Some(false)
        } else {
            None
        }
    }

    /// Certified `self <= other`.
    pub fn le(&self, other: &Interval) -> Option<bool> {
        if self.hi <= other.lo {
            Some(true)
        } else if self.lo > other.hi {
            Some(false)
        } else {
            None
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval {
            lo: down(p, &self.lo + &o.lo),
            hi: up(p, &self.hi + &o.hi),
        }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval {
            lo: down(p, &self.lo - &o.hi),
            hi: up(p, &self.hi - &o.lo),
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        let corners = [
            (&self.lo, &o.lo),
            (&self.lo, &o.hi),
            (&self.hi, &o.lo),
            (&self.hi, &o.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in corners {
            let l = down(p, a * b);
            let h = up(p, a * b);
            lo = Some(match lo {
                Some(x) if x <= l => x,
                _ => l,
            });
            hi = Some(match hi {
                Some(x) if x >= h => x,
                _ => h,
            });
        }
        Interval {
            lo: lo.unwrap(),
            hi: hi.unwrap(),
        }
    }

    pub fn mul_integer(&self, k: &Integer) -> Interval {
        self.mul(&Interval::from_integer(k, self.prec()))
    }

    pub fn mul_i64(&self, k: i64) -> Interval {
        self.mul_integer(&Integer::from(k))
    }

    pub fn mul_rational(&self, r: &Rational) -> Interval {
        self.mul(&Interval::from_rational(r, self.prec()))
    }

    /// Division by an interval that excludes zero.
    pub fn div(&self, o: &Interval) -> Interval {
        assert!(!o.contains_zero(), "interval division by an interval containing zero");
        self.mul(&o.recip())
    }

    pub fn recip(&self) -> Interval {
        assert!(!self.contains_zero(), "reciprocal of an interval containing zero");
        let p = self.prec();
        let one = Float::with_val(p, 1u32);
        Interval {
            lo: down(p, &one / &self.hi),
            hi: up(p, &one / &self.lo),
        }
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0 {
            self.clone()
        } else if self.hi <= 0 {
            self.neg()
        } else {
            let m = if -self.lo.clone() > self.hi {
                -self.lo.clone()
            } else {
                self.hi.clone()
            };
            Interval {
                lo: Float::with_val(m.prec(), 0u32),
                hi: m,
            }
        }
    }

    pub fn max(&self, o: &Interval) -> Interval {
        Interval {
            lo: if self.lo >= o.lo { self.lo.clone() } else { o.lo.clone() },
            hi: if self.hi >= o.hi { self.hi.clone() } else { o.hi.clone() },
        }
    }

    pub fn min(&self, o: &Interval) -> Interval {
        Interval {
            lo: if self.lo <= o.lo { self.lo.clone() } else { o.lo.clone() },
            hi: if self.hi <= o.hi { self.hi.clone() } else { o.hi.clone() },
        }
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        Interval {
            lo: if self.lo <= o.lo { self.lo.clone() } else { o.lo.clone() },
            hi: if self.hi >= o.hi { self.hi.clone() } else { o.hi.clone() },
        }
    }

    /// Square root of a non-negative interval (negative lower part is clamped to zero).
    pub fn sqrt(&self) -> Interval {
        assert!(self.hi >= 0, "sqrt of negative interval");
        let p = self.prec();
        let mut lo = if self.lo < 0 {
            Float::with_val(p, 0u32)
        } else {
            self.lo.clone()
        };
        lo.sqrt_round(Round::Down);
        let mut hi = self.hi.clone();
        hi.sqrt_round(Round::Up);
        Interval { lo, hi }
    }

    /// Natural logarithm of a positive interval.
    pub fn ln(&self) -> Interval {
        assert!(self.lo > 0, "ln of non-positive interval");
        let mut lo = self.lo.clone();
        lo.ln_round(Round::Down);
        let mut hi = self.hi.clone();
        hi.ln_round(Round::Up);
        Interval { lo, hi }
    }

    pub fn exp(&self) -> Interval {
        let mut lo = self.lo.clone();
        lo.exp_round(Round::Down);
        let mut hi = self.hi.clone();
        hi.exp_round(Round::Up);
        Interval { lo, hi }
    }

    /// `self^e` for a positive base, via `exp(e * ln(self))`.
    pub fn pow(&self, e: &Interval) -> Interval {
        self.ln().mul(e).exp()
    }

    pub fn powi(&self, k: u32) -> Interval {
        let mut acc = Interval::from_i64(1, self.prec());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Midpoint (rounded to nearest) and an upper bound on the radius.
    fn mid_rad(&self) -> (Float, Float) {
        let p = self.prec() + 2;
        let mid = Float::with_val(p, &self.lo + &self.hi) / 2u32;
        let r1 = up(p, &self.hi - &mid);
        let r2 = up(p, &mid - &self.lo);
        let rad = if r1 >= r2 { r1 } else { r2 };
        (mid, rad)
    }

    /// Sine, using the 1-Lipschitz bound around the midpoint.
    pub fn sin(&self) -> Interval {
        let (mid, rad) = self.mid_rad();
        let p = self.prec();
        let mut lo = Float::with_val(p, &mid);
        lo.sin_round(Round::Down);
        let mut hi = Float::with_val(p, &mid);
        hi.sin_round(Round::Up);
        Self::lipschitz_widen(lo, hi, &rad, p)
    }

    pub fn cos(&self) -> Interval {
        let (mid, rad) = self.mid_rad();
        let p = self.prec();
        let mut lo = Float::with_val(p, &mid);
        lo.cos_round(Round::Down);
        let mut hi = Float::with_val(p, &mid);
        hi.cos_round(Round::Up);
        Self::lipschitz_widen(lo, hi, &rad, p)
    }

    fn lipschitz_widen(lo: Float, hi: Float, rad: &Float, p: u32) -> Interval {
        let mut lo = down(p, &lo - rad);
        let mut hi = up(p, &hi + rad);
        if lo < -1 {
            lo = Float::with_val(p, -1);
        }
        if hi > 1 {
            hi = Float::with_val(p, 1);
        }
        Interval { lo, hi }
    }

    /// Cotangent of an interval inside `(0, pi)`, where it is decreasing.
    pub fn cot(&self) -> Interval {
        assert!(self.lo > 0, "cot argument must be positive");
        let mut lo = self.hi.clone();
        lo.cot_round(Round::Down);
        let mut hi = self.lo.clone();
        hi.cot_round(Round::Up);
        assert!(lo <= hi, "cot argument outside (0, pi)");
        Interval { lo, hi }
    }

    /// Distance to the nearest integer, when the interval sits inside a
    /// single monotone piece `[k, k+1/2]` or `[k+1/2, k+1]`.
    pub fn nearest_int_dist(&self) -> Option<Interval> {
        let p = self.prec();
        let k = self.lo.clone().floor();
        let half = Float::with_val(p, &k + 0.5f64);
        let next = Float::with_val(p, &k + 1u32);
        if self.hi <= half {
            Some(Interval {
                lo: down(p, &self.lo - &k),
                hi: up(p, &self.hi - &k),
            })
        } else if self.lo >= half && self.hi <= next {
            Some(Interval {
                lo: down(p, &next - &self.hi),
                hi: up(p, &next - &self.lo),
            })
        } else {
            None
        }
    }

    /// Enclosure of the distance to the nearest integer that always succeeds,
    /// using that the distance is 1-Lipschitz.
    pub fn nearest_int_dist_enclosure(&self) -> Interval {
        if let Some(d) = self.nearest_int_dist() {
            return d;
        }
        let (mid, rad) = self.mid_rad();
        let p = self.prec();
        let r = mid.clone().round();
        let dm = Float::with_val(p + 2, &mid - &r).abs();
        let mut lo = down(p, &dm - &rad);
        let mut hi = up(p, &dm + &rad);
        if lo < 0 {
            lo = Float::with_val(p, 0u32);
        }
        if hi > 0.5f64 {
            hi = Float::with_val(p, 0.5f64);
        }
        Interval { lo, hi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt2_enclosure_is_tight() {
        let s = Interval::sqrt_integer(&Integer::from(2), 128);
        assert!(s.mul(&s).contains_rational(&Rational::from(2)));
        assert!((s.mid_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(s.width_at_most_pow2(120));
    }

    #[test]
    fn mul_handles_signs() {
        let a = Interval::from_f64_bounds(-1.0, 2.0);
        let b = Interval::from_f64_bounds(-3.0, 0.5);
        let c = a.mul(&b);
        assert_eq!(c.lo_f64(), -6.0);
        assert_eq!(c.hi_f64(), 3.0);
    }

    #[test]
    fn trig_contains_reference_values() {
        let x = Interval::pi(128).mul_rational(&Rational::from((1, 6)));
        let s = x.sin();
        assert!(s.contains_f64(0.5) || (s.lo_f64() <= 0.5 && s.hi_f64() >= 0.5));
        let c = Interval::pi(128).mul_rational(&Rational::from((1, 3))).cos();
        assert!(c.lo_f64() <= 0.5 && 0.5 <= c.hi_f64());
        let t = Interval::pi(128).mul_rational(&Rational::from((1, 4))).cot();
        assert!(t.lo_f64() <= 1.0 && 1.0 <= t.hi_f64());
    }

    #[test]
    fn nearest_int_pieces() {
        let x = Interval::from_f64_bounds(2.8, 2.9);
        let d = x.nearest_int_dist().unwrap();
        assert!((d.lo_f64() - 0.1).abs() < 1e-12 && (d.hi_f64() - 0.2).abs() < 1e-12);
        let straddle = Interval::from_f64_bounds(2.4, 2.6);
        assert!(straddle.nearest_int_dist().is_none());
        let e = straddle.nearest_int_dist_enclosure();
        assert!(e.lo_f64() <= 0.4 && e.hi_f64() >= 0.5 - 1e-12);
    }

    #[test]
    fn certified_comparisons() {
        let a = Interval::from_f64_bounds(1.0, 2.0);
        let b = Interval::from_f64_bounds(2.5, 3.0);
        assert_eq!(a.lt(&b), Some(true));
        assert_eq!(b.lt(&a), Some(false));
        let c = Interval::from_f64_bounds(1.5, 2.7);
        assert_eq!(a.lt(&c), None);
        assert_eq!(Interval::from_f64(1.0).le(&Interval::from_f64(1.0)), Some(true));
        assert_eq!(Interval::from_f64(1.0).lt(&Interval::from_f64(1.0)), Some(false));
    }
}
