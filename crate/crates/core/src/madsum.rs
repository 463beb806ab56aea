//! Multiplicative Diophantine machinery: the MAD functional, exponent
//! estimation from record minima, reciprocal-product sums and geometric
//! progression exponential sums.
//!
//! Matrices are given by rows; `j` is dotted with every row.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::fastball::FastBall;
use crate::interval::Interval;
use crate::norm::nearest_int_dist_exact;
use crate::precision::Precision;

fn check_matrix(a: &[Vec<ExactReal>]) -> Result<usize> {
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    if cols == 0 || a.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("matrix must be non-empty and rectangular"));
    }
    Ok(cols)
}

fn sup(j: &[i64]) -> i64 {
    j.iter().map(|x| x.abs()).max().unwrap_or(0)
}

fn row_dot(row: &[ExactReal], j: &[i64]) -> ExactReal {
    let mut acc = ExactReal::zero();
    for (x, &ji) in row.iter().zip(j) {
        if ji != 0 {
            acc = acc.add(&x.mul_i64(ji));
        }
    }
    acc
}

/// Exact `prod_u ||j . row_u||`.
fn exact_product(a: &[Vec<ExactReal>], j: &[i64]) -> ExactReal {
    a.iter()
        .fold(ExactReal::one(), |acc, row| acc.mul(&nearest_int_dist_exact(&row_dot(row, j))))
}

/// Certified `|j|^omega * prod_u ||j . row_u||`.
///
/// Exactly zero when some `j . row_u` is an integer.
pub fn mad_functional(a: &[Vec<ExactReal>], j: &[i64], omega: f64, bits: u32) -> Result<Interval> {
    let cols = check_matrix(a)?;
    if j.len() != cols || j.iter().all(|&x| x == 0) {
        return Err(Error::invalid("mad_functional needs a nonzero j of matching length"));
    }
    let prod = exact_product(a, j);
    if prod.is_zero() {
        return Ok(Interval::from_i64(0, bits + 16));
    }
    let mut prec = bits + 32;
    loop {
        let h = Interval::from_i64(sup(j), prec).pow(&Interval::from_f64(omega));
        let v = h.mul(&prod.eval_bits(prec));
        if v.width_at_most_pow2(bits) {
            return Ok(v);
        }
        if prec > 1 << 16 {
            return Err(Error::precision("mad_functional", prec));
        }
        prec *= 2;
    }
}

/// Nonzero integer vectors with `|j| = h` in the half-space whose first
/// nonzero coordinate is positive, in lexicographic order.
pub fn half_shell(dim: usize, h: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; dim];
    fn rec(i: usize, cur: &mut Vec<i64>, h: i64, hit: bool, lead: bool, out: &mut Vec<Vec<i64>>) {
        if i == cur.len() {
            if hit {
                out.push(cur.clone());
            }
            return;
        }
        if i + 1 == cur.len() && !hit {
            // The last coordinate must reach the sup norm itself.
            let vals: &[i64] = if lead { &[h] } else { &[-h, h] };
            for &v in vals {
                cur[i] = v;
                rec(i + 1, cur, h, true, false, out);
            }
        } else {
            let lo = if lead { 0 } else { -h };
            for v in lo..=h {
                cur[i] = v;
                rec(i + 1, cur, h, hit || v.abs() == h, lead && v == 0, out);
            }
        }
        cur[i] = 0;
    }
    rec(0, &mut cur, h, false, true, &mut out);
    out
}

/// One entry of the record-minimum envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub height: i64,
    pub j: Vec<i64>,
    /// Enclosure `[lo, hi]` of the product.
    pub product: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    /// Least-squares slope and its 95% half-width.
    Finite { omega: f64, half_width: f64 },
    /// A vanishing product was found, so the exponent is infinite.
    Infinite { witness: Vec<i64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadDiagnostics {
    pub j_max: i64,
    pub record_minima: Vec<Record>,
    pub fitted: Exponent,
    /// The `j` minimising `|j|^omega * product` among the records.
    pub infimum_witness: Option<Vec<i64>>,
}

impl MadDiagnostics {
    pub fn omega(&self) -> Option<f64> {
        match self.fitted {
            Exponent::Finite { omega, .. } => Some(omega),
            Exponent::Infinite { .. } => None,
        }
    }

    /// CSV `height,j,product_lo,product_hi`.
    pub fn envelope_csv(&self) -> String {
        let mut s = String::from("height,j,product_lo,product_hi\n");
        for r in &self.record_minima {
            let j: Vec<String> = r.j.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{},{},{:.17e},{:.17e}\n", r.height, j.join(" "), r.product.0, r.product.1));
        }
        s
    }
}

/// Product enclosure in `f64` with an exact fallback for ordering.
#[derive(Clone)]
struct Candidate {
    j: Vec<i64>,
    lo: f64,
    hi: f64,
    zero: bool,
}

struct Evaluator {
    a: Vec<Vec<ExactReal>>,
    balls: Vec<Vec<FastBall>>,
}

impl Evaluator {
    fn new(a: &[Vec<ExactReal>]) -> Self {
        let balls = a
            .iter()
            .map(|r| r.iter().map(|x| FastBall::from_interval(&x.eval_bits(110))).collect())
            .collect();
        Evaluator { a: a.to_vec(), balls }
    }

    fn candidate(&self, j: &[i64]) -> Candidate {
        let mut lo = 1.0f64;
        let mut hi = 1.0f64;
        let mut exact_needed = false;
        for row in &self.balls {
            let mut acc = FastBall::ZERO;
            for (b, &ji) in row.iter().zip(j) {
                acc = acc.add(b.mul_int(ji));
            }
            let d = acc.nearest_int_dist();
            if d.lo <= 0.0 {
                exact_needed = true;
                break;
            }
            lo *= d.lo * (1.0 - 4.0 * f64::EPSILON);
            hi *= d.hi * (1.0 + 4.0 * f64::EPSILON);
        }
        if exact_needed {
            let p = exact_product(&self.a, j);
            if p.is_zero() {
                return Candidate { j: j.to_vec(), lo: 0.0, hi: 0.0, zero: true };
            }
            let iv = p.eval_bits(80);
            return Candidate {
                j: j.to_vec(),
                lo: iv.lo_f64(),
                hi: iv.hi_f64(),
                zero: false,
            };
        }
        Candidate { j: j.to_vec(), lo, hi, zero: false }
    }

    /// Certified strict `x < y` of products.
    fn less(&self, x: &Candidate, y: &Candidate) -> bool {
        if x.hi < y.lo {
            return true;
        }
        if x.lo >= y.hi {
            return false;
        }
        exact_product(&self.a, &x.j).cmp_exact(&exact_product(&self.a, &y.j)) == Ordering::Less
    }
}

/// Sweep `0 < |j| <= j_max` by shells and fit the exponent on record minima.
pub fn estimate_exponent(a: &[Vec<ExactReal>], j_max: i64) -> Result<MadDiagnostics> {
    let cols = check_matrix(a)?;
    if j_max < 2 {
        return Err(Error::invalid("estimate_exponent needs J_max >= 2"));
    }
    let ev = Evaluator::new(a);
    // Shells are split into contiguous chunks; each chunk yields its local
    // records, which are then filtered in order against the running minimum.
    let chunk = (j_max / 64).max(1);
    let starts: Vec<i64> = (1..=j_max).step_by(chunk as usize).collect();
    let locals: Vec<(Vec<Candidate>, Option<Vec<i64>>)> = starts
        .par_iter()
        .map(|&s| {
            let mut recs: Vec<Candidate> = Vec::new();
            for h in s..(s + chunk).min(j_max + 1) {
                for j in half_shell(cols, h) {
                    let c = ev.candidate(&j);
                    if c.zero {
                        return (recs, Some(j));
                    }
                    if recs.last().map_or(true, |m| ev.less(&c, m)) {
                        recs.push(c);
                    }
                }
            }
            (recs, None)
        })
        .collect();
    let mut records: Vec<Candidate> = Vec::new();
    for (recs, zero) in locals {
        for c in recs {
            if records.last().map_or(true, |m| ev.less(&c, m)) {
                // Keep one record per height: the latest in the shell wins.
                if records.last().map_or(false, |m| sup(&m.j) == sup(&c.j)) {
                    records.pop();
                }
                records.push(c);
            }
        }
        if let Some(j) = zero {
            return Ok(MadDiagnostics {
                j_max,
                record_minima: to_records(&records),
                fitted: Exponent::Infinite { witness: j.clone() },
                infimum_witness: Some(j),
            });
        }
    }
    let xs: Vec<f64> = records.iter().map(|c| (sup(&c.j) as f64).ln()).collect();
    let ys: Vec<f64> = records.iter().map(|c| -(0.5 * (c.lo + c.hi)).ln()).collect();
    let (omega, half_width) = least_squares_slope(&xs, &ys);
    let witness = records
        .iter()
        .min_by(|x, y| {
            let fx = (sup(&x.j) as f64).powf(omega) * x.lo;
            let fy = (sup(&y.j) as f64).powf(omega) * y.lo;
            fx.total_cmp(&fy)
        })
        .map(|c| c.j.clone());
    Ok(MadDiagnostics {
        j_max,
        record_minima: to_records(&records),
        fitted: Exponent::Finite { omega, half_width },
        infimum_witness: witness,
    })
}

fn to_records(c: &[Candidate]) -> Vec<Record> {
    c.iter()
        .map(|c| Record {
            height: sup(&c.j),
            j: c.j.clone(),
            product: (c.lo, c.hi),
        })
        .collect()
}

/// Ordinary least squares slope with a 1.96 standard-error half-width.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::INFINITY);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if xs.len() < 3 {
        return (slope, f64::INFINITY);
    }
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - my - slope * (x - mx);
            r * r
        })
        .sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    (slope, 1.96 * se)
}

/// Certified `sum_{0 < |j| <= J} prod_u ||j . row_u||^-1`.
pub fn mad_sum(a: &[Vec<ExactReal>], big_j: i64, precision: Precision) -> Result<Interval> {
    let cols = check_matrix(a)?;
    if big_j < 2 {
        return Err(Error::invalid("mad_sum needs J >= 2"));
    }
    let prec = precision.bits + 2 * (64 - big_j.leading_zeros());
    let rows: Vec<Vec<Interval>> = a.iter().map(|r| r.iter().map(|x| x.eval_bits(prec)).collect()).collect();
    let heights: Vec<i64> = (1..=big_j).collect();
    let parts: Vec<Result<Interval>> = heights
        .par_chunks(256)
        .map(|hs| {
            let mut acc = Interval::from_i64(0, prec);
            for &h in hs {
                for j in half_shell(cols, h) {
                    let mut term = Interval::from_i64(1, prec);
                    for (u, row) in rows.iter().enumerate() {
                        let mut dot = Interval::from_i64(0, prec);
                        for (x, &ji) in row.iter().zip(&j) {
                            dot = dot.add(&x.mul_i64(ji));
                        }
                        let d = match dot.nearest_int_dist() {
                            Some(d) if d.is_positive() => d,
                            _ => {
                                let e = nearest_int_dist_exact(&row_dot(&a[u], &j));
                                if e.is_zero() {
                                    return Err(Error::ZeroProduct { j });
                                }
                                e.eval_bits(prec)
                            }
                        };
                        term = term.mul(&d);
                    }
                    acc = acc.add(&term.recip());
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = Interval::from_i64(0, prec);
    for p in parts {
        total = total.add(&p?);
    }
    // Symmetry j -> -j doubles the half-space sum.
    Ok(total.mul_i64(2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumFitRow {
    pub j: i64,
    pub sum: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumFit {
    pub c: f64,
    pub omega: f64,
    pub l: u32,
    pub rows: Vec<SumFitRow>,
}

impl SumFit {
    /// CSV `J,mad_sum,bound,slack`.
    pub fn csv(&self) -> String {
        let mut s = String::from("J,mad_sum,bound,slack\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.17e},{:.17e},{:.17e}\n", r.j, r.sum, r.bound, r.slack));
        }
        s
    }

    /// Re-evaluate with a frozen constant: every row's slack under `c`.
    pub fn with_constant(&self, c: f64) -> SumFit {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let g = r.bound / self.c;
                SumFitRow {
                    j: r.j,
                    sum: r.sum,
                    bound: c * g,
                    slack: c * g - r.sum,
                }
            })
            .collect();
        SumFit {
            c,
            omega: self.omega,
            l: self.l,
            rows,
        }
    }
}

/// `J^omega (log J)^l`.
pub fn growth(j: i64, omega: f64, l: u32) -> f64 {
    (j as f64).powf(omega) * (j as f64).ln().powi(l as i32)
}

/// Smallest `C` with `mad_sum(J) <= C J^omega (log J)^l` on the grid, using
/// the upper end of each certified sum.
pub fn fit_sum_constant(a: &[Vec<ExactReal>], omega: f64, l: u32, grid: &[i64], precision: Precision) -> Result<SumFit> {
    let mut sums = Vec::with_capacity(grid.len());
    for &j in grid {
        sums.push((j, mad_sum(a, j, precision)?.hi_f64()));
    }
    let c = sums
        .iter()
        .map(|&(j, s)| s / growth(j, omega, l))
        .fold(0.0f64, f64::max);
    let rows = sums
        .into_iter()
        .map(|(j, s)| {
            let bound = c * growth(j, omega, l);
            SumFitRow {
                j,
                sum: s,
                bound,
                slack: bound - s,
            }
        })
        .collect();
    Ok(SumFit { c, omega, l, rows })
}

/// Certified `|sum_{a=a0}^{a0+k-1} e(a x)| = |sin(pi k x) / sin(pi x)|`.
///
/// The modulus does not depend on `a0`.
pub fn progression_exp_sum(x: &ExactReal, _a0: i64, k: u64, precision: Precision) -> Result<Interval> {
    if k == 0 {
        return Err(Error::invalid("progression_exp_sum needs k >= 1"));
    }
    let frac = |v: &ExactReal| v.sub(&ExactReal::from_integer(v.floor()));
    let fx = frac(x);
    if fx.is_zero() {
        return Ok(Interval::from_i64(k as i64, precision.bits));
    }
    let fkx = frac(&x.mul_i64(k as i64));
    for b in precision.ladder() {
        let p = b + 32 + 2 * (64 - k.leading_zeros());
        let pi = Interval::pi(p);
        let den = pi.mul(&fx.eval_bits(p)).sin();
        if !den.is_positive() {
            continue;
        }
        let num = pi.mul(&fkx.eval_bits(p)).sin().abs();
        let v = num.div(&den);
        if v.width_at_most_pow2(precision.bits) {
            return Ok(v);
        }
    }
    Err(Error::precision("progression_exp_sum near ||x|| = 0", precision.max_bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(s: &str) -> ExactReal {
        s.parse().unwrap()
    }

    fn phi() -> Vec<Vec<ExactReal>> {
        vec![vec![x("(1+1*sqrt(5))/2")]]
    }

    #[test]
    fn functional_examples() {
        let v = mad_functional(&[vec![x("1/2")]], &[2], 1.7, 64).unwrap();
        assert_eq!(v.hi_f64(), 0.0);
        let v = mad_functional(&phi(), &[1], 1.0, 64).unwrap();
        assert!((v.mid_f64() - 0.3819660112501051).abs() < 1e-15);
        let v = mad_functional(&phi(), &[2], 1.0, 64).unwrap();
        assert!((v.mid_f64() - 0.4721359549995794).abs() < 1e-15);
    }

    #[test]
    fn functional_is_even_in_j() {
        let a = vec![vec![ExactReal::sqrt(2), x("1/3")], vec![ExactReal::sqrt(3), ExactReal::sqrt(7)]];
        for j in [[1i64, 2], [3, -5], [0, 4]] {
            let neg = [-j[0], -j[1]];
            let p = mad_functional(&a, &j, 1.3, 64).unwrap();
            let m = mad_functional(&a, &neg, 1.3, 64).unwrap();
            assert!((p.mid_f64() - m.mid_f64()).abs() < 1e-15);
        }
    }

    #[test]
    fn half_shells_cover_shells() {
        assert_eq!(half_shell(1, 3), vec![vec![3]]);
        let s = half_shell(2, 1);
        assert_eq!(s, vec![vec![0, 1], vec![1, -1], vec![1, 0], vec![1, 1]]);
        for h in 1..5 {
            assert_eq!(half_shell(2, h).len() as i64 * 2, (2 * h + 1).pow(2) - (2 * h - 1).pow(2));
        }
    }

    #[test]
    fn rational_row_has_infinite_exponent() {
        let d = estimate_exponent(&[vec![x("1/2")]], 100).unwrap();
        assert_eq!(d.fitted, Exponent::Infinite { witness: vec![2] });
    }

    #[test]
    fn golden_ratio_exponent() {
        let d = estimate_exponent(&phi(), 100_000).unwrap();
        let w = d.omega().unwrap();
        assert!((w - 1.0).abs() < 0.1, "omega {w}");
        // Record minima are strictly decreasing and sit at Fibonacci numbers.
        let hs: Vec<i64> = d.record_minima.iter().map(|r| r.height).collect();
        assert_eq!(&hs[..6], &[1, 2, 3, 5, 8, 13]);
        for r in d.record_minima.windows(2) {
            assert!(r[1].product.1 < r[0].product.0 || r[1].product.0 < r[0].product.0);
        }
    }

    #[test]
    fn sqrt2_exponent() {
        let d = estimate_exponent(&[vec![ExactReal::sqrt(2)]], 100_000).unwrap();
        assert!((d.omega().unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn sum_examples() {
        let s = mad_sum(&phi(), 2, Precision::default()).unwrap();
        assert!((s.mid_f64() - 13.708203932499369).abs() < 1e-3);
        let t = mad_sum(&[vec![x("1/3")]], 2, Precision::default()).unwrap();
        assert!(t.contains_rational(&rug::Rational::from(12)));
        assert!(mad_sum(&phi(), 1, Precision::default()).is_err());
        assert!(matches!(
            mad_sum(&[vec![x("1/3")]], 3, Precision::default()),
            Err(Error::ZeroProduct { .. })
        ));
    }

    #[test]
    fn sum_is_monotone() {
        let mut prev = 0.0;
        for j in [2, 3, 5, 8, 40, 100] {
            let s = mad_sum(&phi(), j, Precision::default()).unwrap();
            assert!(s.lo_f64() >= prev);
            prev = s.hi_f64();
        }
    }

    #[test]
    fn fit_examples() {
        let grid: Vec<i64> = (3..=12).map(|e| 1i64 << e).collect();
        let fit = fit_sum_constant(&phi(), 1.2, 1, &grid, Precision::default()).unwrap();
        assert!(fit.c.is_finite() && fit.c > 0.0);
        assert!(fit.rows.iter().all(|r| r.slack >= 0.0));
        let doubled: Vec<i64> = grid.iter().map(|j| 2 * j).collect();
        let fit2 = fit_sum_constant(&phi(), 1.2, 1, &doubled, Precision::default()).unwrap();
        assert!(fit2.c <= 2.0 * fit.c && fit.c <= 2.0 * fit2.c);
        assert!(fit_sum_constant(&[vec![x("1/4")]], 1.2, 1, &grid, Precision::default()).is_err());
    }

    #[test]
    fn exp_sum_examples() {
        let p = Precision::default();
        assert!(progression_exp_sum(&x("3"), 7, 5, p).unwrap().contains_rational(&rug::Rational::from(5)));
        let v = progression_exp_sum(&x("1/2"), 0, 2, p).unwrap();
        assert!(v.lo_f64() <= 0.0 && v.hi_f64() < 1e-30);
        let v = progression_exp_sum(&x("1/3"), 0, 2, p).unwrap();
        assert!((v.mid_f64() - 1.0).abs() < 1e-30);
    }

    proptest! {
        #[test]
        fn exp_sum_below_reciprocal_distance(num in 1i64..1000, den in 2i64..1000, d in 2u64..50, a0 in -50i64..50, k in 1u64..10_000) {
            let xv = ExactReal::sqrt(d).mul_rational(&rug::Rational::from((num, den)));
            let s = progression_exp_sum(&xv, a0, k, Precision::default()).unwrap();
            let dist = nearest_int_dist_exact(&xv);
            prop_assume!(!dist.is_zero());
            let inv = dist.enclose(128).recip();
            prop_assert!(s.lo_f64() <= inv.hi_f64() + 1e-12);
            prop_assert!(s.lo_f64() <= k as f64 + 1e-9);
        }

        #[test]
        fn direct_sum_agrees(num in 1i64..97, k in 1u64..60, a0 in -20i64..20) {
            let xv = ExactReal::from_ratio(num, 97);
            let s = progression_exp_sum(&xv, a0, k, Precision::default()).unwrap();
            let t = num as f64 / 97.0;
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for a in a0..a0 + k as i64 {
                let ang = 2.0 * std::f64::consts::PI * a as f64 * t;
                re += ang.cos();
                im += ang.sin();
            }
            prop_assert!((s.mid_f64() - re.hypot(im)).abs() < 1e-9);
        }
    }
}
