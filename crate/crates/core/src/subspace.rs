//! Affine subspaces `{(x, x a + a0)}`, hatted vectors, the lift map, strips,
//! and the neighbourhood function `Psi(q) = psi(q) / (2 n |a| q)`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::approx_fn::{ApproxFunction, Threshold};
use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::fastball::{Bounds, FastBall};
use crate::interval::Interval;
use crate::norm;
use crate::precision::Precision;

/// An `n`-dimensional affine subspace of `R^d` given by a tilt matrix and a shift.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineSubspaceSpec {
    d: usize,
    n: usize,
    tilt: Vec<Vec<ExactReal>>,
    shift: Vec<ExactReal>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    d: usize,
    n: usize,
    tilt: Vec<Vec<ExactReal>>,
    shift: Vec<ExactReal>,
}

impl AffineSubspaceSpec {
    pub fn new(d: usize, n: usize, tilt: Vec<Vec<ExactReal>>, shift: Vec<ExactReal>) -> Result<Self> {
        if d < 2 || n == 0 || n >= d {
            return Err(Error::invalid(format!("subspace needs 1 <= n < d, got n={n}, d={d}")));
        }
        let m = d - n;
        if tilt.len() != n || tilt.iter().any(|r| r.len() != m) {
            return Err(Error::invalid(format!("tilt must be {n}x{m}")));
        }
        if shift.len() != m {
            return Err(Error::invalid(format!("shift must have {m} entries")));
        }
        Ok(AffineSubspaceSpec { d, n, tilt, shift })
    }

    /// The line `y = a x + a0` in the plane.
    pub fn line(a: ExactReal, a0: ExactReal) -> Self {
        AffineSubspaceSpec {
            d: 2,
            n: 1,
            tilt: vec![vec![a]],
            shift: vec![a0],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `d - n`.
    pub fn codim(&self) -> usize {
        self.d - self.n
    }

    pub fn tilt(&self) -> &[Vec<ExactReal>] {
        &self.tilt
    }

    pub fn shift(&self) -> &[ExactReal] {
        &self.shift
    }

    /// `(n+1) x (d-n)` matrix: shift on top, then the tilt rows.
    pub fn augmented(&self) -> Vec<Vec<ExactReal>> {
        let mut rows = Vec::with_capacity(self.n + 1);
        rows.push(self.shift.clone());
        rows.extend(self.tilt.iter().cloned());
        rows
    }

    /// Largest absolute entry of the tilt.
    pub fn tilt_norm(&self) -> ExactReal {
        let mut best = ExactReal::zero();
        for x in self.tilt.iter().flatten() {
            let a = x.abs();
            if a.cmp_exact(&best) == Ordering::Greater {
                best = a;
            }
        }
        best
    }

    pub fn is_zero_tilt(&self) -> bool {
        self.tilt.iter().flatten().all(|x| x.is_zero())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: SpecFile = toml::from_str(text).map_err(|e| Error::Parse {
            field: "subspace".into(),
            message: e.message().to_string(),
        })?;
        Self::new(f.d, f.n, f.tilt, f.shift)
    }

    /// Canonical text form; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        let quote = |row: &[ExactReal]| {
            row.iter()
                .map(|x| format!("\"{x}\""))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = String::new();
        writeln!(s, "d = {}", self.d).unwrap();
        writeln!(s, "n = {}", self.n).unwrap();
        let rows: Vec<String> = self.tilt.iter().map(|r| format!("[{}]", quote(r))).collect();
        writeln!(s, "tilt = [{}]", rows.join(", ")).unwrap();
        writeln!(s, "shift = [{}]", quote(&self.shift)).unwrap();
        s
    }
}

impl Serialize for AffineSubspaceSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecFile {
            d: self.d,
            n: self.n,
            tilt: self.tilt.clone(),
            shift: self.shift.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AffineSubspaceSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let f = SpecFile::deserialize(de)?;
        Self::new(f.d, f.n, f.tilt, f.shift).map_err(serde::de::Error::custom)
    }
}

/// `p^ = (q, p)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HattedVector {
    pub q: i64,
    pub p: Vec<i64>,
}

impl HattedVector {
    pub fn new(q: i64, p: Vec<i64>) -> Result<Self> {
        if q < 1 {
            return Err(Error::invalid("hatted vector needs q >= 1"));
        }
        Ok(HattedVector { q, p })
    }

    /// Sup norm `max(|q|, |p_i|)`.
    pub fn sup_norm(&self) -> i64 {
        self.p.iter().fold(self.q.abs(), |m, x| m.max(x.abs()))
    }

    /// `p/q` lies in `[0,1]^n`.
    pub fn in_unit_cube(&self) -> bool {
        self.p.iter().all(|&x| 0 <= x && x <= self.q)
    }
}

/// `q * row_1 + sum_i p_i * row_{i+1}`, exactly.
pub fn hat_dot(ph: &HattedVector, aug: &[Vec<ExactReal>]) -> Result<Vec<ExactReal>> {
    if aug.len() != ph.p.len() + 1 {
        return Err(Error::invalid("hat_dot: dimension mismatch"));
    }
    let m = aug[0].len();
    let mut out = Vec::with_capacity(m);
    for c in 0..m {
        let mut acc = aug[0][c].mul_i64(ph.q);
        for (i, &pi) in ph.p.iter().enumerate() {
            if pi != 0 {
                acc = acc.add(&aug[i + 1][c].mul_i64(pi));
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// `(x, x~ a~)` with `x~ = (1, x)`.
pub fn lift(x: &[ExactReal], spec: &AffineSubspaceSpec) -> Result<Vec<ExactReal>> {
    if x.len() != spec.n {
        return Err(Error::invalid("lift: point has wrong dimension"));
    }
    let zero = ExactReal::zero();
    let one = ExactReal::one();
    if x.iter().any(|c| c.cmp_exact(&zero) == Ordering::Less || c.cmp_exact(&one) == Ordering::Greater) {
        return Err(Error::invalid("lift: point outside [0,1]^n"));
    }
    let mut out = x.to_vec();
    for c in 0..spec.codim() {
        let mut acc = spec.shift[c].clone();
        for (i, xi) in x.iter().enumerate() {
            acc = acc.add(&xi.mul(&spec.tilt[i][c]));
        }
        out.push(acc);
    }
    Ok(out)
}

/// Index `v` of the strip `S_v = prod [v_i, v_i + 1) x R^(d-n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StripIndex {
    pub v: Vec<i64>,
}

impl StripIndex {
    pub fn new(v: Vec<i64>) -> Self {
        StripIndex { v }
    }

    /// The strip containing the first `n` coordinates given.
    pub fn containing(x: &[f64]) -> Self {
        StripIndex {
            v: x.iter().map(|c| c.floor() as i64).collect(),
        }
    }
}

/// Same tilt, shift `a0 + v a`.
pub fn strip_translate(spec: &AffineSubspaceSpec, v: &StripIndex) -> Result<AffineSubspaceSpec> {
    if v.v.len() != spec.n {
        return Err(Error::invalid("strip index has wrong dimension"));
    }
    let mut shift = spec.shift.clone();
    for (c, s) in shift.iter_mut().enumerate() {
        for (i, &vi) in v.v.iter().enumerate() {
            if vi != 0 {
                *s = s.add(&spec.tilt[i][c].mul_i64(vi));
            }
        }
    }
    AffineSubspaceSpec::new(spec.d, spec.n, spec.tilt.clone(), shift)
}

/// Sup-norm ball in `[0,1]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<ExactReal>,
    #[serde(with = "rational_str")]
    pub radius: Rational,
}

impl Ball {
    pub fn new(center: Vec<ExactReal>, radius: Rational) -> Result<Self> {
        if radius <= 0 {
            return Err(Error::invalid("ball radius must be positive"));
        }
        let r = ExactReal::from_rational(&radius);
        let one = ExactReal::one();
        for c in &center {
            if c.sub(&r).sign() == Ordering::Less || c.add(&r).cmp_exact(&one) == Ordering::Greater {
                return Err(Error::invalid("ball must lie inside [0,1]^n"));
            }
        }
        Ok(Ball { center, radius })
    }

    /// `[0,1]^n`.
    pub fn unit(n: usize) -> Self {
        Ball {
            center: vec![ExactReal::from_ratio(1, 2); n],
            radius: Rational::from((1, 2)),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(2 eta)^n`.
    pub fn measure(&self) -> Rational {
        let side = Rational::from(&self.radius * 2u32);
        let mut m = Rational::from(1);
        for _ in 0..self.dim() {
            m *= &side;
        }
        m
    }

    /// Integer range of `p_i` with `|p_i - q x_i| < q eta`, per coordinate.
    pub fn integer_box(&self, q: i64) -> Vec<(Integer, Integer)> {
        let r = ExactReal::from_rational(&self.radius).mul_i64(q);
        self.center
            .iter()
            .map(|c| norm::open_integer_range(&c.mul_i64(q), &r))
            .collect()
    }
}

pub(crate) mod rational_str {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let v = toml::Value::deserialize(d)?;
        let s = match v {
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            other => return Err(serde::de::Error::custom(format!("expected a rational, got {other}"))),
        };
        crate::exact::parse_rational_literal(&s).map_err(serde::de::Error::custom)
    }
}

/// `Psi(q) = psi(q) / (2 n |a| q)` as a certified threshold.
pub fn psi_capital_threshold(q: u64, psi: &ApproxFunction, spec: &AffineSubspaceSpec) -> Result<Threshold> {
    if q == 0 {
        return Err(Error::invalid("Psi needs q >= 1"));
    }
    if spec.is_zero_tilt() {
        return Err(Error::DegenerateTilt);
    }
    let norm = spec.tilt_norm();
    let denom = norm.mul_i64(2 * spec.n as i64 * q as i64);
    let qi = Integer::from(q);
    if let Some(v) = psi.exact_value(&qi) {
        if let Some(r) = denom.as_rational() {
            return Ok(Threshold::exact(v.mul_rational(&Rational::from(r.recip_ref()))));
        }
    }
    let psi = psi.clone();
    Ok(Threshold::from_fn(move |prec| psi.eval(&qi, prec).div(&denom.enclose(prec))))
}

/// Certified enclosure of `Psi(q)` at working precision `bits`.
pub fn psi_capital(q: u64, psi: &ApproxFunction, spec: &AffineSubspaceSpec, bits: u32) -> Result<Interval> {
    Ok(psi_capital_threshold(q, psi, spec)?.enclose(bits))
}

/// `||p^ a~||` tests with an `f64` fast path and an exact fallback.
#[derive(Clone, Debug)]
pub struct ClosenessKernel {
    aug: Vec<Vec<ExactReal>>,
    balls: Vec<Vec<FastBall>>,
    precision: Precision,
}

/// Outcome of a fast closeness test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FastVerdict {
    Inside,
    Outside,
    Undecided,
}

impl ClosenessKernel {
    pub fn new(spec: &AffineSubspaceSpec, precision: Precision) -> Self {
        let aug = spec.augmented();
        let balls = aug
            .iter()
            .map(|row| row.iter().map(|x| FastBall::from_interval(&x.eval_bits(110))).collect())
            .collect();
        ClosenessKernel { aug, balls, precision }
    }

    pub fn augmented(&self) -> &[Vec<ExactReal>] {
        &self.aug
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Fast enclosure of `||(p^ a~)_c||` for one column.
    #[inline]
    pub fn column_dist(&self, q: i64, p: &[i64], c: usize) -> Bounds {
        let mut acc = self.balls[0][c].mul_int(q);
        for (i, &pi) in p.iter().enumerate() {
            acc = acc.add(self.balls[i + 1][c].mul_int(pi));
        }
        acc.nearest_int_dist()
    }

    #[inline]
    pub fn fast_test(&self, q: i64, p: &[i64], thr: &Bounds) -> FastVerdict {
        let mut verdict = FastVerdict::Inside;
        for c in 0..self.balls[0].len() {
            match self.column_dist(q, p, c).lt(thr) {
                Some(true) => {}
                Some(false) => return FastVerdict::Outside,
                None => verdict = FastVerdict::Undecided,
            }
        }
        verdict
    }

    /// Certified `||p^ a~|| < thr`.
    pub fn is_close(&self, q: i64, p: &[i64], thr: &Threshold) -> Result<bool> {
        let tb = thr.bounds();
        for c in 0..self.balls[0].len() {
            match self.column_dist(q, p, c).lt(&tb) {
                Some(true) => continue,
                Some(false) => return Ok(false),
                None => {
                    let v = self.exact_column(q, p, c);
                    if !norm::dist_lt(&v, thr, self.precision).map_err(|e| with_point(e, q, p))? {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    fn exact_column(&self, q: i64, p: &[i64], c: usize) -> ExactReal {
        let mut acc = self.aug[0][c].mul_i64(q);
        for (i, &pi) in p.iter().enumerate() {
            if pi != 0 {
                acc = acc.add(&self.aug[i + 1][c].mul_i64(pi));
            }
        }
        acc
    }

    /// Certified `||p^ a~||` with width at most `2^-bits`.
    pub fn closeness(&self, q: i64, p: &[i64]) -> Result<Interval> {
        let cols: Vec<ExactReal> = (0..self.aug[0].len()).map(|c| self.exact_column(q, p, c)).collect();
        norm::nearest_int_dist(&cols, self.precision).map_err(|e| with_point(e, q, p))
    }
}

fn with_point(e: Error, q: i64, p: &[i64]) -> Error {
    match e {
        Error::PrecisionExhausted { context, bits } => Error::PrecisionExhausted {
            context: format!("{context} at p^=({q},{p:?})"),
            bits,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(s: &str) -> ExactReal {
        s.parse().unwrap()
    }

    fn sqrt2_line() -> AffineSubspaceSpec {
        AffineSubspaceSpec::line(ExactReal::sqrt(2), ExactReal::zero())
    }

    #[test]
    fn hat_dot_examples() {
        let aug = sqrt2_line().augmented();
        let v = hat_dot(&HattedVector::new(5, vec![2]).unwrap(), &aug).unwrap();
        assert_eq!(v[0], ExactReal::sqrt(2).mul_i64(2));

        let aug = vec![vec![x("1/2")], vec![x("1/3")], vec![x("1/5")]];
        let v = hat_dot(&HattedVector::new(3, vec![1, 2]).unwrap(), &aug).unwrap();
        assert_eq!(v[0], x("67/30"));
    }

    #[test]
    fn lift_examples() {
        let l = sqrt2_line();
        assert_eq!(lift(&[x("0")], &l).unwrap(), vec![x("0"), x("0")]);
        let y = lift(&[x("1/2")], &l).unwrap();
        assert_eq!(y[1], ExactReal::sqrt(2).mul_rational(&Rational::from((1, 2))));
        let s = AffineSubspaceSpec::new(3, 2, vec![vec![x("1/3")], vec![x("1/7")]], vec![x("1/2")]).unwrap();
        assert_eq!(lift(&[x("1"), x("1")], &s).unwrap(), vec![x("1"), x("1"), x("41/42")]);
        assert!(lift(&[x("3/2")], &l).is_err());
    }

    #[test]
    fn psi_capital_examples() {
        let psi = ApproxFunction::power(Rational::from((1, 2))).unwrap();
        let v = psi_capital(100, &psi, &sqrt2_line(), 128).unwrap();
        let expect = 1.0 / (2.0 * 2f64.sqrt() * 1000.0);
        assert!((v.mid_f64() - expect).abs() < 1e-15);

        let one = ApproxFunction::constant(Rational::from(1)).unwrap();
        let half = AffineSubspaceSpec::line(x("1/2"), x("0"));
        let t = psi_capital_threshold(1, &one, &half).unwrap();
        assert_eq!(t.exact_value(), Some(&x("1")));

        let inv = ApproxFunction::power(Rational::from(1)).unwrap();
        let a = psi_capital_threshold(7, &inv, &half).unwrap();
        let b = psi_capital_threshold(14, &inv, &half).unwrap();
        assert_eq!(b.exact_value().unwrap().mul_i64(4), *a.exact_value().unwrap());

        let flat = AffineSubspaceSpec::line(x("0"), x("1/3"));
        assert!(matches!(psi_capital(3, &one, &flat, 64), Err(Error::DegenerateTilt)));
    }

    #[test]
    fn strip_translate_examples() {
        let l = sqrt2_line();
        assert_eq!(strip_translate(&l, &StripIndex::new(vec![0])).unwrap(), l);
        let t = strip_translate(&l, &StripIndex::new(vec![1])).unwrap();
        assert_eq!(t.shift()[0], ExactReal::sqrt(2));
        assert_eq!(t.tilt()[0][0], ExactReal::sqrt(2));
        let back = strip_translate(&t, &StripIndex::new(vec![-1])).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn spec_text_round_trip() {
        let s = AffineSubspaceSpec::new(
            3,
            1,
            vec![vec![x("(1+1*sqrt(5))/2"), x("-3/7")]],
            vec![x("(0+1*sqrt(2))/1"), x("0")],
        )
        .unwrap();
        let text = s.to_text();
        let back = AffineSubspaceSpec::parse(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
        assert!(AffineSubspaceSpec::parse("d = 2\nn = 2\ntilt = []\nshift = []\n").is_err());
    }

    #[test]
    fn ball_box_is_open() {
        let b = Ball::unit(1);
        let r = b.integer_box(5);
        assert_eq!(r[0], (Integer::from(1), Integer::from(4)));
        assert_eq!(b.measure(), 1);
        assert!(Ball::new(vec![x("1/4")], Rational::from((1, 2))).is_err());
    }

    #[test]
    fn kernel_agrees_with_exact() {
        let k = ClosenessKernel::new(&sqrt2_line(), Precision::default());
        let thr = Threshold::rational(&Rational::from((1, 5)));
        assert!(k.is_close(5, &[2], &thr).unwrap());
        assert!(!k.is_close(5, &[3], &thr).unwrap());
        let c = k.closeness(5, &[2]).unwrap();
        assert!((c.mid_f64() - 0.17157287525381).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn hat_dot_difference_is_linear(q in 1i64..1000, p in 0i64..1000, p2 in 0i64..1000) {
            let aug = vec![vec![x("(1+1*sqrt(5))/2")], vec![x("(3+2*sqrt(3))/7")]];
            let a = hat_dot(&HattedVector { q, p: vec![p] }, &aug).unwrap();
            let b = hat_dot(&HattedVector { q, p: vec![p2] }, &aug).unwrap();
            prop_assert_eq!(a[0].sub(&b[0]), aug[1][0].mul_i64(p - p2));
        }

        #[test]
        fn translations_compose(u in -5i64..5, v in -5i64..5, w in -5i64..5, z in -5i64..5) {
            let s = AffineSubspaceSpec::new(
                3, 2,
                vec![vec![ExactReal::sqrt(2)], vec![x("(1+1*sqrt(5))/2")]],
                vec![x("1/3")],
            ).unwrap();
            let a = strip_translate(&strip_translate(&s, &StripIndex::new(vec![u, v])).unwrap(), &StripIndex::new(vec![w, z])).unwrap();
            let b = strip_translate(&s, &StripIndex::new(vec![u + w, v + z])).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn lift_lands_on_subspace(num in 0i64..=97) {
            let s = AffineSubspaceSpec::line(ExactReal::sqrt(3), x("1/2"));
            let xv = ExactReal::from_ratio(num, 97);
            let y = lift(&[xv.clone()], &s).unwrap();
            prop_assert_eq!(&y[1], &x("1/2").add(&xv.mul(&ExactReal::sqrt(3))));
        }
    }
}
