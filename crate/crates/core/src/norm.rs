//! Certified distance to the nearest integer.

use std::cmp::Ordering;

use rug::{Integer, Rational};

use crate::approx_fn::Threshold;
use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::interval::Interval;
use crate::precision::Precision;

/// Exact `||x||` as an exact real.
pub fn nearest_int_dist_exact(x: &ExactReal) -> ExactReal {
    let half = ExactReal::from_ratio(1, 2);
    let n = x.add(&half).floor();
    x.sub(&ExactReal::from_integer(n)).abs()
}

fn component_dist(x: &ExactReal, precision: Precision) -> Result<Interval> {
    let bits = precision.bits;
    if let Some(r) = x.as_rational() {
        let n = Rational::from(&r + Rational::from((1, 2))).floor();
        let d = Rational::from(&r - &n).abs();
        return Ok(Interval::from_rational(&d, bits + 64));
    }
    for b in precision.ladder() {
        let iv = x.eval_bits(b + 2);
        if let Some(d) = iv.nearest_int_dist() {
            if d.width_at_most_pow2(bits) {
                return Ok(d);
            }
        }
    }
    Err(Error::precision(
        format!("cannot separate ||{}|| from 0 or 1/2", x),
        precision.max_bits,
    ))
}

/// Certified sup-norm distance of a vector to the nearest integer point,
/// with width at most `2^-precision.bits`.
pub fn nearest_int_dist(x: &[ExactReal], precision: Precision) -> Result<Interval> {
    let mut acc = Interval::from_i64(0, precision.bits + 64);
    for c in x {
        acc = acc.max(&component_dist(c, precision)?);
    }
    Ok(acc)
}

/// Certified `||value|| < threshold`.
///
/// Exact thresholds are decided exactly, ties included. Other thresholds go
/// through the precision ladder and fail with `PrecisionExhausted` if the
/// comparison is still ambiguous at the cap.
pub fn dist_lt(value: &ExactReal, thr: &Threshold, precision: Precision) -> Result<bool> {
    if let Some(t) = thr.exact_value() {
        return Ok(nearest_int_dist_exact(value).cmp_exact(t) == Ordering::Less);
    }
    for b in precision.ladder() {
        let iv = value.eval_bits(b);
        if let Some(d) = iv.nearest_int_dist() {
            if let Some(ans) = d.lt(&thr.enclose(b + 8)) {
                return Ok(ans);
            }
        }
    }
    Err(Error::precision(
        format!("||{}|| < {:?} undecided", value, thr),
        precision.max_bits,
    ))
}

/// Exact integers `p` with `|p - center| < radius`.
pub fn open_integer_range(center: &ExactReal, radius: &ExactReal) -> (Integer, Integer) {
    let lo_edge = center.sub(radius);
    let hi_edge = center.add(radius);
    let mut lo = lo_edge.floor();
    if ExactReal::from_integer(lo.clone()).cmp_exact(&lo_edge) != Ordering::Greater {
        lo += 1;
    }
    let mut hi = hi_edge.ceil();
    if ExactReal::from_integer(hi.clone()).cmp_exact(&hi_edge) != Ordering::Less {
        hi -= 1;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(s: &str) -> ExactReal {
        s.parse().unwrap()
    }

    #[test]
    fn max_of_components() {
        let d = nearest_int_dist(&[x("2/5"), x("7/4")], Precision::default()).unwrap();
        assert!(d.contains_rational(&Rational::from((2, 5))));
        assert!(d.width_at_most_pow2(128));
    }

    #[test]
    fn integer_vector_is_zero() {
        let d = nearest_int_dist(&[x("3"), x("-11"), x("0")], Precision::default()).unwrap();
        assert_eq!(d.lo_f64(), 0.0);
        assert_eq!(d.hi_f64(), 0.0);
    }

    #[test]
    fn two_sqrt2() {
        let d = nearest_int_dist(&[ExactReal::sqrt(2).mul_i64(2)], Precision::new(40, 400)).unwrap();
        assert!((d.mid_f64() - 0.171572875253810).abs() < 1e-5);
        assert!(d.width_at_most_pow2(40));
    }

    #[test]
    fn exact_threshold_ties() {
        let half = Threshold::rational(&Rational::from((1, 4)));
        assert!(!dist_lt(&x("3/4"), &half, Precision::default()).unwrap());
        assert!(dist_lt(&x("4/5"), &half, Precision::default()).unwrap());
    }

    #[test]
    fn open_range_excludes_boundary() {
        let (lo, hi) = open_integer_range(&x("5/2"), &x("5/2"));
        assert_eq!((lo, hi), (Integer::from(1), Integer::from(4)));
        let (lo, hi) = open_integer_range(&ExactReal::sqrt(2).mul_i64(10), &x("1"));
        assert_eq!((lo, hi), (Integer::from(14), Integer::from(15)));
    }
}
