//! Exact real numbers of the form `(a_1 + a_2*sqrt(D_2) + ... ) / r`.
//!
//! Radicands are kept square-free and distinct, so a value is zero exactly
//! when every coefficient is zero. The set is closed under addition,
//! subtraction and multiplication, which is everything the subspace
//! machinery needs (hatted dot products, lifts, strip translations,
//! determinants of block systems).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Upper limit on evaluation precision used by exact sign and floor queries.
const EXACT_PRECISION_CEILING: u32 = 1 << 20;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactReal {
    /// `(radicand, coefficient)`, radicands square-free, strictly increasing,
    /// coefficients non-zero. Radicand 1 is the rational part.
    terms: Vec<(u64, Integer)>,
    /// Positive common denominator, coprime to the gcd of the coefficients.
    den: Integer,
}

fn squarefree_split(mut d: u64) -> (u64, u64) {
    // d = s^2 * core
    let mut s = 1u64;
    let mut core = 1u64;
    let mut f = 2u64;
    while f * f <= d {
        let mut e = 0;
        while d % f == 0 {
            d /= f;
            e += 1;
        }
        s *= f.pow(e / 2);
        if e % 2 == 1 {
            core *= f;
        }
        f += if f == 2 { 1 } else { 2 };
    }
    core *= d;
    (s, core)
}

impl ExactReal {
    pub fn zero() -> Self {
        ExactReal {
            terms: Vec::new(),
            den: Integer::from(1),
        }
    }

    pub fn one() -> Self {
        Self::from_integer(Integer::from(1))
    }

    pub fn from_integer(n: Integer) -> Self {
        Self::from_parts(vec![(1, n)], Integer::from(1))
    }

    pub fn from_i64(n: i64) -> Self {
        Self::from_integer(Integer::from(n))
    }

    pub fn from_rational(r: &Rational) -> Self {
        Self::from_parts(vec![(1, r.numer().clone())], r.denom().clone())
    }

    pub fn from_ratio(p: i64, r: i64) -> Self {
        Self::from_rational(&Rational::from((p, r)))
    }

    /// `(p + q*sqrt(d)) / r`.
    pub fn quadratic(p: Integer, q: Integer, d: u64, r: Integer) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("zero denominator"));
        }
        Ok(Self::from_parts(vec![(1, p), (d, q)], r))
    }

    pub fn sqrt(d: u64) -> Self {
        Self::from_parts(vec![(d, Integer::from(1))], Integer::from(1))
    }

    /// Exact value of a finite `f64`.
    pub fn from_f64(x: f64) -> Result<Self> {
        Rational::from_f64(x)
            .map(|r| Self::from_rational(&r))
            .ok_or_else(|| Error::invalid("non-finite float"))
    }

    /// Normalising constructor. `den` must be non-zero.
    pub fn from_parts(raw: Vec<(u64, Integer)>, den: Integer) -> Self {
        assert!(den != 0, "zero denominator");
        let mut acc: Vec<(u64, Integer)> = Vec::with_capacity(raw.len());
        for (d, c) in raw {
            if c == 0 {
                continue;
            }
            if d == 0 {
                continue;
            }
            let (s, core) = squarefree_split(d);
            let c = c * Integer::from(s);
            match acc.binary_search_by(|(k, _)| k.cmp(&core)) {
                Ok(i) => acc[i].1 += c,
                Err(i) => acc.insert(i, (core, c)),
            }
        }
        acc.retain(|(_, c)| *c != 0);
        let mut den = den;
        if den < 0 {
            den = -den;
            for (_, c) in acc.iter_mut() {
                *c = -c.clone();
            }
        }
        if acc.is_empty() {
            return Self::zero();
        }
        let mut g = den.clone();
        for (_, c) in &acc {
            g = g.gcd(c);
        }
        if g != 1 {
            den /= &g;
            for (_, c) in acc.iter_mut() {
                *c /= &g;
            }
        }
        ExactReal { terms: acc, den }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value as a rational, when it has no surd part.
    pub fn as_rational(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::new()),
            [(1, c)] => Some(Rational::from((c.clone(), self.den.clone()))),
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        self.as_rational().is_some()
    }

    /// `(p, q, D, r)` when the value is `(p + q*sqrt(D))/r` with a single surd.
    pub fn as_quadratic(&self) -> Option<(Integer, Integer, u64, Integer)> {
        match self.terms.as_slice() {
            [(d, q)] if *d != 1 => Some((Integer::new(), q.clone(), *d, self.den.clone())),
            [(1, p), (d, q)] => Some((p.clone(), q.clone(), *d, self.den.clone())),
            _ => None,
        }
    }

    pub fn terms(&self) -> &[(u64, Integer)] {
        &self.terms
    }

    pub fn denominator(&self) -> &Integer {
        &self.den
    }

    pub fn neg(&self) -> Self {
        ExactReal {
            terms: self.terms.iter().map(|(d, c)| (*d, -c.clone())).collect(),
            den: self.den.clone(),
        }
    }

    pub fn add(&self, o: &ExactReal) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let den = Integer::from(&self.den * &o.den);
        let mut raw = Vec::with_capacity(self.terms.len() + o.terms.len());
        for (d, c) in &self.terms {
            raw.push((*d, Integer::from(c * &o.den)));
        }
        for (d, c) in &o.terms {
            raw.push((*d, Integer::from(c * &self.den)));
        }
        Self::from_parts(raw, den)
    }

    pub fn sub(&self, o: &ExactReal) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &ExactReal) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut raw = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (d1, c1) in &self.terms {
            for (d2, c2) in &o.terms {
                let g = num_gcd(*d1, *d2);
                // sqrt(d1) sqrt(d2) = g * sqrt(d1 d2 / g^2)
                let rad = (d1 / g) * (d2 / g);
                raw.push((rad, Integer::from(c1 * c2) * Integer::from(g)));
            }
        }
        Self::from_parts(raw, Integer::from(&self.den * &o.den))
    }

    pub fn mul_integer(&self, k: &Integer) -> Self {
        if *k == 0 {
            return Self::zero();
        }
        Self::from_parts(
            self.terms
                .iter()
                .map(|(d, c)| (*d, Integer::from(c * k)))
                .collect(),
            self.den.clone(),
        )
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        self.mul_integer(&Integer::from(k))
    }

    pub fn mul_rational(&self, r: &Rational) -> Self {
        if *r == 0 {
            return Self::zero();
        }
        Self::from_parts(
            self.terms
                .iter()
                .map(|(d, c)| (*d, Integer::from(c * r.numer())))
                .collect(),
            Integer::from(&self.den * r.denom()),
        )
    }

    pub fn abs(&self) -> Self {
        if self.sign() == Ordering::Less {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Enclosure at working precision `prec` (no width guarantee).
    pub fn enclose(&self, prec: u32) -> Interval {
        let mut acc = Interval::from_i64(0, prec);
        for (d, c) in &self.terms {
            let term = if *d == 1 {
                Interval::from_integer(c, prec)
            } else {
                Interval::sqrt_integer(&Integer::from(*d), prec).mul_integer(c)
            };
            acc = acc.add(&term);
        }
        acc.div(&Interval::from_integer(&self.den, prec))
    }

    /// Rough `log2` of the magnitude of the numerator terms, used to size guard bits.
    fn magnitude_bits(&self) -> u32 {
        self.terms
            .iter()
            .map(|(d, c)| c.significant_bits() + (64 - d.leading_zeros()) / 2 + 1)
            .max()
            .unwrap_or(0)
    }

    /// Enclosure of width at most `2^-bits`.
    pub fn eval_bits(&self, bits: u32) -> Interval {
        if let Some(r) = self.as_rational() {
            let iv = Interval::from_rational(&r, bits + 64);
            if iv.width_at_most_pow2(bits) {
                return iv;
            }
        }
        let mut prec = bits + self.magnitude_bits() + 16 + 2 * self.terms.len() as u32;
        loop {
            let iv = self.enclose(prec);
            if iv.width_at_most_pow2(bits) {
                return iv;
            }
            prec += prec / 2 + 16;
        }
    }

    /// Exact sign.
    pub fn sign(&self) -> Ordering {
        if self.is_zero() {
            return Ordering::Equal;
        }
        if let Some(r) = self.as_rational() {
            return r.cmp0();
        }
        let mut prec = 64 + self.magnitude_bits();
        loop {
            if let Some(s) = self.enclose(prec).sign() {
                return s;
            }
            assert!(prec < EXACT_PRECISION_CEILING, "sign did not separate from zero");
            prec *= 2;
        }
    }

    pub fn cmp_exact(&self, o: &ExactReal) -> Ordering {
        self.sub(o).sign()
    }

    pub fn cmp_rational(&self, r: &Rational) -> Ordering {
        self.sub(&ExactReal::from_rational(r)).sign()
    }

    /// Exact floor.
    pub fn floor(&self) -> Integer {
        if let Some(r) = self.as_rational() {
            return r.floor().numer().clone();
        }
        let mut prec = 64 + self.magnitude_bits();
        loop {
            let iv = self.enclose(prec);
            let a = iv.lo().clone().floor();
            let b = iv.hi().clone().floor();
            if a == b {
                return a.to_integer().expect("finite floor");
            }
            assert!(prec < EXACT_PRECISION_CEILING, "floor did not separate");
            prec *= 2;
        }
    }

    pub fn ceil(&self) -> Integer {
        -self.neg().floor()
    }

    /// Closest `f64` (not certified; for reporting only).
    pub fn to_f64(&self) -> f64 {
        self.eval_bits(60).mid_f64()
    }
}

fn num_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl fmt::Display for ExactReal {
    /// Canonical text: `p` or `p/r` for rationals, `(p+q*sqrt(D)...)/r` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.as_rational() {
            return write!(f, "{}", r);
        }
        let rational_part = match self.terms.first() {
            Some((1, c)) => c.clone(),
            _ => Integer::new(),
        };
        write!(f, "({}", rational_part)?;
        for (d, c) in self.terms.iter().filter(|(d, _)| *d != 1) {
            let sign = if *c < 0 { '-' } else { '+' };
            write!(f, "{}{}*sqrt({})", sign, c.clone().abs(), d)?;
        }
        write!(f, ")/{}", self.den)
    }
}

impl fmt::Debug for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn parse_err(s: &str, msg: &str) -> Error {
    Error::Parse {
        field: s.to_string(),
        message: msg.to_string(),
    }
}

fn parse_integer(s: &str) -> Option<Integer> {
    let t = s.strip_prefix('+').unwrap_or(s);
    if t.is_empty() || !t.trim_start_matches('-').chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    Integer::from_str_radix(t, 10).ok()
}

/// Plain rational literal: `p`, `p/r` or a decimal such as `-0.125`.
fn parse_rational(s: &str) -> Option<Rational> {
    if let Some((a, b)) = s.split_once('/') {
        let p = parse_integer(a)?;
        let r = parse_integer(b)?;
        if r == 0 {
            return None;
        }
        return Some(Rational::from((p, r)));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let int_digits = if int_digits.is_empty() { "0" } else { int_digits };
        let whole = parse_integer(int_digits)?;
        let scale = Integer::from(10).pow(frac.len() as u32);
        let num = whole * &scale + parse_integer(frac)?;
        let r = Rational::from((num, scale));
        return Some(if neg { -r } else { r });
    }
    parse_integer(s).map(Rational::from)
}

/// One additive term inside parentheses: `c`, `c*sqrt(D)` or `sqrt(D)`.
fn parse_term(t: &str) -> Option<(u64, Integer)> {
    let (neg, body) = match t.as_bytes().first()? {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let (coef, rad) = if let Some(idx) = body.find("sqrt(") {
        let coef_str = &body[..idx];
        let coef = if coef_str.is_empty() {
            Integer::from(1)
        } else {
            parse_integer(coef_str.strip_suffix('*')?)?
        };
        let inner = body[idx + 5..].strip_suffix(')')?;
        let d: u64 = inner.parse().ok()?;
        (coef, d)
    } else {
        (parse_integer(body)?, 1)
    };
    Some((rad, if neg { -coef } else { coef }))
}

impl FromStr for ExactReal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(parse_err(&s, "empty literal"));
        }
        if let Some(r) = parse_rational(&s) {
            return Ok(ExactReal::from_rational(&r));
        }
        // Surd forms: (terms)/r, (terms), or a bare c*sqrt(D).
        let (inner, den) = if let Some(rest) = s.strip_prefix('(') {
            let close = rest
                .rfind(')')
                .ok_or_else(|| parse_err(&s, "missing ')'"))?;
            let inner = &rest[..close];
            let tail = &rest[close + 1..];
            let den = if tail.is_empty() {
                Integer::from(1)
            } else {
                let d = tail
                    .strip_prefix('/')
                    .and_then(parse_integer)
                    .ok_or_else(|| parse_err(&s, "bad denominator"))?;
                if d == 0 {
                    return Err(parse_err(&s, "zero denominator"));
                }
                d
            };
            (inner.to_string(), den)
        } else {
            (s.clone(), Integer::from(1))
        };
        let mut terms = Vec::new();
        let bytes = inner.as_bytes();
        let mut start = 0;
        let mut depth = 0i32;
        for i in 0..=bytes.len() {
            let at_split = i == bytes.len()
                || (depth == 0 && i > start && (bytes[i] == b'+' || bytes[i] == b'-'));
            if at_split {
                let tok = &inner[start..i];
                let term = parse_term(tok).ok_or_else(|| parse_err(&s, "bad term"))?;
                if term.0 == 0 {
                    return Err(parse_err(&s, "radicand must be positive"));
                }
                terms.push(term);
                start = i;
            }
            if i < bytes.len() {
                match bytes[i] {
                    b'(' => depth += 1,
                    b')' => depth -= 1,
                    _ => {}
                }
            }
        }
        Ok(ExactReal::from_parts(terms, den))
    }
}

impl serde::Serialize for ExactReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for ExactReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = ExactReal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an exact real literal such as \"3/4\" or \"(1+1*sqrt(5))/2\"")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<ExactReal, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<ExactReal, E> {
                Ok(ExactReal::from_i64(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<ExactReal, E> {
                Ok(ExactReal::from_integer(Integer::from(v)))
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<ExactReal, E> {
                ExactReal::from_f64(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Parses a rational literal (`p`, `p/r`, or a terminating decimal).
pub fn parse_rational_literal(s: &str) -> Result<Rational> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    parse_rational(&t).ok_or_else(|| parse_err(s, "expected a rational literal"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(s: &str) -> ExactReal {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(x("6/8").to_string(), "3/4");
        assert_eq!(x("-6/-8").to_string(), "3/4");
        assert_eq!(x("4/2").to_string(), "2");
        assert_eq!(x("0.125").to_string(), "1/8");
        assert_eq!(x("(2+2*sqrt(8))/4").to_string(), "(1+2*sqrt(2))/2");
        assert_eq!(x("sqrt(2)").to_string(), "(0+1*sqrt(2))/1");
        assert_eq!(x("(1-1*sqrt(5))/2").to_string(), "(1-1*sqrt(5))/2");
        assert_eq!(x("(0+3*sqrt(4))/1").to_string(), "6");
        assert_eq!(x("(1+1*sqrt(2)+1*sqrt(3))/1").to_string(), "(1+1*sqrt(2)+1*sqrt(3))/1");
    }

    #[test]
    fn rejects_bad_literals() {
        assert!("".parse::<ExactReal>().is_err());
        assert!("1/0".parse::<ExactReal>().is_err());
        assert!("(1+sqrt(2)".parse::<ExactReal>().is_err());
        assert!("(1+2*sqrt(x))/3".parse::<ExactReal>().is_err());
        assert!("(1+1*sqrt(2))/0".parse::<ExactReal>().is_err());
    }

    #[test]
    fn products_of_surds_stay_exact() {
        let a = ExactReal::sqrt(2);
        let b = ExactReal::sqrt(6);
        // sqrt(2) * sqrt(6) = 2*sqrt(3)
        assert_eq!(a.mul(&b), x("(0+2*sqrt(3))/1"));
        assert_eq!(a.mul(&a), ExactReal::from_i64(2));
        let phi = x("(1+1*sqrt(5))/2");
        // phi^2 = phi + 1
        assert_eq!(phi.mul(&phi), phi.add(&ExactReal::one()));
    }

    #[test]
    fn exact_sign_and_floor() {
        let two_sqrt2 = ExactReal::sqrt(2).mul_i64(2);
        assert_eq!(two_sqrt2.floor(), 2);
        assert_eq!(two_sqrt2.ceil(), 3);
        assert_eq!(x("(3-2*sqrt(2))/1").sign(), Ordering::Greater);
        assert_eq!(x("(2-1*sqrt(5))/1").sign(), Ordering::Less);
        assert_eq!(ExactReal::sqrt(2).sub(&ExactReal::sqrt(2)).sign(), Ordering::Equal);
        assert_eq!(x("-7/2").floor(), -4);
    }

    #[test]
    fn eval_width_contract() {
        let v = x("(1+1*sqrt(5))/2");
        for bits in [10u32, 64, 200, 500] {
            let iv = v.eval_bits(bits);
            assert!(iv.width_at_most_pow2(bits));
            assert!(iv.contains_f64(1.618033988749895) || bits > 50);
        }
    }
}
