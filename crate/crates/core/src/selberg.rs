//! Selberg majorant and minorant polynomials for the indicator of `(-delta, delta)` on the circle.
//!
//! Coefficients follow the classical construction from the Beurling function:
//!
//! ```text
//! b_k = J^(|k|/(J+1)) * sin(2 pi k delta)/(pi k)  +/-  (1 - |k|/(J+1)) * cos(2 pi k delta)/(J+1)
//! J^(u) = pi u (1-u) cot(pi u) + u,   J^(0) = 1
//! ```
//!
//! so `b_0 = 2 delta +/- 1/(J+1)`. All coefficients are real and even in `k`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fastball::{Bounds, FastBall};
use crate::interval::Interval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Majorant,
    Minorant,
}

#[derive(Clone, Debug)]
pub struct TrigPolynomial {
    degree: u32,
    delta: Rational,
    sign: Sign,
    prec: u32,
    /// `b_0, ..., b_J`; `b_{-j} = b_j`.
    coeffs: Vec<Interval>,
    fast: Vec<FastBall>,
}

/// `J^(u)` for rational `0 < u < 1`.
fn beurling_weight(u: &Rational, prec: u32) -> Interval {
    let ui = Interval::from_rational(u, prec);
    let one_minus = Interval::from_rational(&Rational::from(1 - u.clone()), prec);
    let pu = Interval::pi(prec).mul(&ui);
    pu.mul(&one_minus).mul(&pu.cot()).add(&ui)
}

/// `sin(2 pi x)` and `cos(2 pi x)` for rational `x`, reduced mod 1 first.
fn sin_cos_2pi(x: &Rational, prec: u32) -> (Interval, Interval) {
    let frac = Rational::from(x - x.clone().floor());
    let arg = Interval::pi(prec).mul_rational(&Rational::from(frac * 2u32));
    (arg.sin(), arg.cos())
}

impl TrigPolynomial {
    /// The classical Selberg polynomial of degree `J` at working precision `prec`.
    pub fn construct(delta: &Rational, degree: u32, sign: Sign, prec: u32) -> Result<Self> {
        if *delta <= 0 || *delta >= Rational::from((1, 2)) {
            return Err(Error::invalid("selberg: delta must lie in (0, 1/2)"));
        }
        if degree == 0 {
            return Err(Error::invalid("selberg: degree must be at least 1"));
        }
        let prec = prec.max(64) + 2 * (32 - degree.leading_zeros());
        let j1 = Integer::from(degree + 1);
        let inv = Interval::from_rational(&Rational::from((Integer::from(1), j1.clone())), prec);
        let s = match sign {
            Sign::Majorant => 1,
            Sign::Minorant => -1,
        };
        let mut coeffs = Vec::with_capacity(degree as usize + 1);
        let b0 = Interval::from_rational(&Rational::from(delta * 2u32), prec).add(&inv.mul_i64(s));
        coeffs.push(b0);
        let pi = Interval::pi(prec);
        for k in 1..=degree {
            let u = Rational::from((Integer::from(k), j1.clone()));
            let (sn, cs) = sin_cos_2pi(&Rational::from(delta * k), prec);
            let main = beurling_weight(&u, prec).mul(&sn).div(&pi.mul_i64(k as i64));
            let fejer = Interval::from_rational(&Rational::from(1 - u), prec);
            let corr = fejer.mul(&cs).mul(&inv);
            coeffs.push(if s > 0 { main.add(&corr) } else { main.sub(&corr) });
        }
        let fast = coeffs.iter().map(FastBall::from_interval).collect();
        Ok(TrigPolynomial {
            degree,
            delta: delta.clone(),
            sign,
            prec,
            coeffs,
            fast,
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// `(re b_j, im b_j)` for `|j| <= J`.
    pub fn coefficient(&self, j: i64) -> (Interval, Interval) {
        assert!(j.unsigned_abs() <= self.degree as u64, "coefficient index out of range");
        (
            self.coeffs[j.unsigned_abs() as usize].clone(),
            Interval::from_i64(0, self.prec),
        )
    }

    /// Exact `b_0 = 2 delta +/- 1/(J+1)`.
    pub fn expected_b0(&self) -> Rational {
        let r = Rational::from((1, self.degree + 1));
        match self.sign {
            Sign::Majorant => Rational::from(&self.delta * 2u32) + r,
            Sign::Minorant => Rational::from(&self.delta * 2u32) - r,
        }
    }

    /// Mean over the circle, which is `b_0`.
    pub fn mean(&self) -> &Interval {
        &self.coeffs[0]
    }

    /// `1/(J+1) + min(2 delta, 1/(pi |j|))`.
    pub fn coefficient_bound(&self, j: i64) -> Interval {
        let p = self.prec;
        let a = Interval::from_rational(&Rational::from(&self.delta * 2u32), p);
        let b = Interval::pi(p).mul_i64(j.abs()).recip();
        let inv = Interval::from_rational(&Rational::from((1, self.degree + 1)), p);
        inv.add(&a.min(&b))
    }

    /// Certified check of `|b_j| <= bound_j` for every `0 < |j| <= J`.
    pub fn coefficients_within_bounds(&self) -> bool {
        (1..=self.degree as i64).all(|j| self.coeffs[j as usize].abs().le(&self.coefficient_bound(j)) == Some(true))
    }

    /// Certified `S(y)` with width at most `2^-bits`. The imaginary part is
    /// exactly zero because the coefficients are real and even.
    pub fn evaluate(&self, y: &Rational, bits: u32) -> Result<Interval> {
        let (s1, c1) = sin_cos_2pi(y, self.prec);
        let (mut c, mut s) = (c1.clone(), s1.clone());
        let mut acc = Interval::from_i64(0, self.prec);
        for j in 1..=self.degree as usize {
            acc = acc.add(&self.coeffs[j].mul(&c));
            let cn = c.mul(&c1).sub(&s.mul(&s1));
            let sn = s.mul(&c1).add(&c.mul(&s1));
            c = cn;
            s = sn;
        }
        let v = self.coeffs[0].add(&acc.mul_i64(2));
        if !v.width_at_most_pow2(bits) {
            return Err(Error::precision(
                format!("selberg evaluation at y = {y} too wide"),
                self.prec,
            ));
        }
        Ok(v)
    }

    /// Fast certified enclosure of `S(y)` in `f64`, with `e(y)` supplied as balls.
    pub fn evaluate_fast(&self, c1: FastBall, s1: FastBall) -> Bounds {
        let (mut c, mut s) = (c1, s1);
        let mut acc = FastBall::ZERO;
        for j in 1..=self.degree as usize {
            acc = acc.add(self.fast[j].mul(c));
            let cn = c.mul(c1).sub(s.mul(s1));
            let sn = s.mul(c1).add(c.mul(s1));
            c = cn;
            s = sn;
        }
        self.fast[0].add(acc.mul_int(2)).bounds()
    }

    /// CSV with columns `j,re,im,bound`, one row per `0 <= j <= J`.
    pub fn coefficients_csv(&self) -> String {
        let mut out = String::from("j,re,im,bound\n");
        for j in 0..=self.degree as i64 {
            let bound = if j == 0 {
                "".to_string()
            } else {
                format!("{:.17e}", self.coefficient_bound(j).hi_f64())
            };
            writeln!(out, "{},{:.17e},{:.17e},{}", j, self.coeffs[j as usize].mid_f64(), 0.0, bound).unwrap();
        }
        out
    }
}

/// `chi_(-delta, delta)(y)` for `y` mod 1, or `None` at the endpoints.
pub fn indicator(delta: &Rational, y: &Rational) -> Option<bool> {
    let frac = Rational::from(y - y.clone().floor());
    let centered = if frac > Rational::from((1, 2)) { frac - 1u32 } else { frac };
    match centered.abs().cmp(delta) {
        Ordering::Less => Some(true),
        Ordering::Greater => Some(false),
        Ordering::Equal => None,
    }
}

/// Result of a majorization grid test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub points: usize,
    pub skipped_endpoints: usize,
    pub violations: usize,
    pub slow_path: usize,
}

/// Certified `S^- <= chi <= S^+` at every sample point.
pub fn majorization_grid(minus: &TrigPolynomial, plus: &TrigPolynomial, ys: &[Rational]) -> Result<GridReport> {
    if minus.delta != plus.delta || minus.degree != plus.degree {
        return Err(Error::invalid("majorization grid needs matching polynomials"));
    }
    let mut rep = GridReport {
        points: ys.len(),
        skipped_endpoints: 0,
        violations: 0,
        slow_path: 0,
    };
    for y in ys {
        let chi = match indicator(&plus.delta, y) {
            Some(true) => 1.0,
            Some(false) => 0.0,
            None => {
                rep.skipped_endpoints += 1;
                continue;
            }
        };
        let (s1, c1) = sin_cos_2pi(y, 80);
        let (c1, s1) = (FastBall::from_interval(&c1), FastBall::from_interval(&s1));
        let lo = minus.evaluate_fast(c1, s1);
        let hi = plus.evaluate_fast(c1, s1);
        if lo.hi <= chi && hi.lo >= chi {
            continue;
        }
        rep.slow_path += 1;
        let chi_iv = Interval::from_i64(chi as i64, 64);
        let lo = minus.evaluate(y, 0)?;
        let hi = plus.evaluate(y, 0)?;
        if lo.le(&chi_iv) != Some(true) || chi_iv.le(&hi) != Some(true) {
            rep.violations += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rational {
        Rational::from((p, q))
    }

    #[test]
    fn b0_matches_formula() {
        let plus = TrigPolynomial::construct(&r(1, 10), 9, Sign::Majorant, 128).unwrap();
        let minus = TrigPolynomial::construct(&r(1, 10), 9, Sign::Minorant, 128).unwrap();
        assert!(plus.mean().contains_rational(&r(3, 10)));
        assert!(minus.mean().contains_rational(&r(1, 10)));
        assert_eq!(plus.expected_b0(), r(3, 10));
        assert!(plus.mean().width_at_most_pow2(120));
    }

    #[test]
    fn coefficient_bound_example() {
        let p = TrigPolynomial::construct(&r(1, 4), 3, Sign::Majorant, 128).unwrap();
        let b = p.coefficient_bound(2);
        let expect = 0.25 + 1.0 / (2.0 * std::f64::consts::PI);
        assert!((b.mid_f64() - expect).abs() < 1e-15);
        assert!(p.coefficients_within_bounds());
    }

    #[test]
    fn values_at_special_points() {
        for &(dn, dd) in &[(1, 20), (1, 10), (3, 10)] {
            for j in [4u32, 16, 64] {
                let plus = TrigPolynomial::construct(&r(dn, dd), j, Sign::Majorant, 128).unwrap();
                let minus = TrigPolynomial::construct(&r(dn, dd), j, Sign::Minorant, 128).unwrap();
                // Contact points of the extremal functions can land exactly on 0 or 1/2.
                let at0 = plus.evaluate(&r(0, 1), 60).unwrap();
                assert!(at0.hi_f64() >= 1.0 && at0.lo_f64() >= 1.0 - 1e-30);
                let at_half = minus.evaluate(&r(1, 2), 60).unwrap();
                assert!(at_half.lo_f64() <= 0.0 && at_half.hi_f64() <= 1e-30);
            }
        }
    }

    #[test]
    fn mean_is_b0_by_quadrature() {
        // The trapezoid rule with more than 2J nodes integrates e(jy) exactly.
        let p = TrigPolynomial::construct(&r(1, 5), 8, Sign::Majorant, 128).unwrap();
        let nodes = 40;
        let mut acc = Interval::from_i64(0, 128);
        for i in 0..nodes {
            acc = acc.add(&p.evaluate(&r(i, nodes), 60).unwrap());
        }
        let mean = acc.mul_rational(&r(1, nodes));
        assert!((mean.mid_f64() - p.mean().mid_f64()).abs() < 1e-25_f64.max(1e-15));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(TrigPolynomial::construct(&r(1, 2), 4, Sign::Majorant, 128).is_err());
        assert!(TrigPolynomial::construct(&r(0, 1), 4, Sign::Majorant, 128).is_err());
        assert!(TrigPolynomial::construct(&r(1, 4), 0, Sign::Majorant, 128).is_err());
    }

    #[test]
    fn endpoints_are_excluded() {
        assert_eq!(indicator(&r(1, 10), &r(1, 10)), None);
        assert_eq!(indicator(&r(1, 10), &r(-1, 10)), None);
        assert_eq!(indicator(&r(1, 10), &r(19, 20)), Some(true));
        assert_eq!(indicator(&r(1, 10), &r(1, 2)), Some(false));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let p = TrigPolynomial::construct(&r(1, 10), 4, Sign::Minorant, 128).unwrap();
        let csv = p.coefficients_csv();
        assert!(csv.starts_with("j,re,im,bound\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    proptest! {
        #[test]
        fn fast_path_encloses_slow_path(num in 0i64..100_000, dn in 1i64..49, j in 1u32..40) {
            let y = r(num, 100_000);
            let p = TrigPolynomial::construct(&r(dn, 100), j, Sign::Majorant, 128).unwrap();
            let (s1, c1) = sin_cos_2pi(&y, 80);
            let fast = p.evaluate_fast(FastBall::from_interval(&c1), FastBall::from_interval(&s1));
            let slow = p.evaluate(&y, 60).unwrap();
            prop_assert!(fast.lo <= slow.lo_f64() && slow.hi_f64() <= fast.hi);
        }

        #[test]
        fn majorizes_at_random_points(num in 0i64..1_000_003, dn in 1i64..49, j in 1u32..40) {
            let y = r(num, 1_000_003);
            let plus = TrigPolynomial::construct(&r(dn, 100), j, Sign::Majorant, 128).unwrap();
            let minus = TrigPolynomial::construct(&r(dn, 100), j, Sign::Minorant, 128).unwrap();
            let rep = majorization_grid(&minus, &plus, &[y]).unwrap();
            prop_assert_eq!(rep.violations, 0);
        }
    }
}
