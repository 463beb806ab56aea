//! psi-approximability of points on the subspace, empirical measure of the
//! approximable set, series classification, and box-counting dimension.

use std::cmp::Ordering;

use rayon::prelude::*;
use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::approx_fn::{ApproxFunction, Threshold};
use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::madsum::least_squares_slope;
use crate::norm;
use crate::precision::Precision;
use crate::sampler::{Proportion, Sampler};
use crate::subspace::{lift, psi_capital_threshold, AffineSubspaceSpec, Ball, HattedVector};
use crate::window::{Budget, CloseEnumerator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxVerdict {
    pub x: Vec<ExactReal>,
    /// Smallest `q` in `[q_min, q_max]` with `||q lift(x)|| < psi(q)`.
    pub first_q: Option<u64>,
    pub q_min: u64,
    pub q_max: u64,
}

/// `psi(q)` in double precision for `q <= q_max`, relative error far below 1e-12.
struct PsiTable {
    v: Vec<f64>,
}

impl PsiTable {
    fn new(psi: &ApproxFunction, q_max: u64) -> Self {
        let mut v = vec![0.0; q_max as usize + 1];
        match psi {
            ApproxFunction::PowerLog { c, tau, sigma } => {
                let (c, tau, sigma) = (c.to_f64(), tau.to_f64(), sigma.to_f64());
                for (q, slot) in v.iter_mut().enumerate().skip(1) {
                    let qf = q as f64;
                    let mut x = c * qf.powf(-tau);
                    if sigma != 0.0 {
                        x *= (qf + 1.0).ln().powf(-sigma);
                    }
                    *slot = x;
                }
            }
            ApproxFunction::Table { .. } => {
                for (q, slot) in v.iter_mut().enumerate().skip(1) {
                    *slot = psi.eval_u64(q as u64, 64).mid_f64();
                }
            }
        }
        PsiTable { v }
    }
}

/// Scans `q = q_min..=q_max`, stopping at the first certified success.
fn scan(
    y: &[ExactReal],
    yf: &[f64],
    psi: &ApproxFunction,
    table: &PsiTable,
    q_min: u64,
    q_max: u64,
    precision: Precision,
) -> Result<Option<u64>> {
    'q: for q in q_min.max(1)..=q_max {
        let t = table.v[q as usize];
        let qf = q as f64;
        let mut undecided = false;
        for &yj in yf {
            let u = qf * yj;
            let dist = (u - u.round()).abs();
            let margin = qf * (yj.abs() + 1.0) * 1e-15 + t * 1e-12 + 1e-300;
            if dist - margin >= t {
                continue 'q;
            }
            if dist + margin >= t {
                undecided = true;
            }
        }
        if !undecided {
            return Ok(Some(q));
        }
        let thr = psi.threshold(q, &Rational::from(1));
        let mut ok = true;
        for yj in y {
            if !norm::dist_lt(&yj.mul_i64(q as i64), &thr, precision)
                .map_err(|e| at_q(e, q))?
            {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

fn at_q(e: Error, q: u64) -> Error {
    match e {
        Error::PrecisionExhausted { context, bits } => Error::PrecisionExhausted {
            context: format!("{context} at q = {q}"),
            bits,
        },
        other => other,
    }
}

pub fn is_approximable_upto(
    x: &[ExactReal],
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    q_max: u64,
    precision: Precision,
) -> Result<ApproxVerdict> {
    is_approximable_between(x, spec, psi, 1, q_max, precision)
}

/// As [`is_approximable_upto`], ignoring `q < q_min`.
pub fn is_approximable_between(
    x: &[ExactReal],
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    q_min: u64,
    q_max: u64,
    precision: Precision,
) -> Result<ApproxVerdict> {
    check_height(q_max)?;
    let y = lift(x, spec)?;
    let yf: Vec<f64> = y.iter().map(|v| v.to_f64()).collect();
    let table = PsiTable::new(psi, q_max);
    let first_q = scan(&y, &yf, psi, &table, q_min, q_max, precision)?;
    Ok(ApproxVerdict { x: x.to_vec(), first_q, q_min, q_max })
}

fn check_height(q_max: u64) -> Result<()> {
    if q_max > 1 << 32 {
        return Err(Error::invalid("truncation height too large"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub q_max: u64,
    pub hits: u64,
    pub samples: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub q_min: u64,
    pub seed: u64,
    pub rows: Vec<MeasureRow>,
}

impl MeasureReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("Q,fraction,ci_low,ci_high\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.6},{:.6},{:.6}\n", r.q_max, r.fraction, r.ci_low, r.ci_high));
        }
        s
    }

    pub fn increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].hits >= w[0].hits)
    }
}

/// Fraction of sampled `x` in `[0,1]^n` approximable with `q_min <= q <= Q`,
/// for each `Q` in `heights`. Each sample is scanned once up to the largest `Q`.
pub fn empirical_measure(
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    heights: &[u64],
    samples: u64,
    q_min: u64,
    seed: u64,
    precision: Precision,
    budget: u128,
) -> Result<MeasureReport> {
    let q_top = *heights.iter().max().ok_or_else(|| Error::invalid("no heights given"))?;
    check_height(q_top)?;
    let n = spec.n();
    let sampler = Sampler::with_at_least(seed, samples, n);
    let total = sampler.count(n);
    Budget::new(budget).charge(total as u128 * q_top as u128, "empirical measure")?;
    let table = PsiTable::new(psi, q_top);
    let ball = Ball::unit(n);
    let firsts: Vec<Option<u64>> = (0..total)
        .into_par_iter()
        .map(|i| {
            let x = sampler.exact_point(&ball, i);
            let y = lift(&x, spec)?;
            let yf: Vec<f64> = y.iter().map(|v| v.to_f64()).collect();
            scan(&y, &yf, psi, &table, q_min, q_top, precision)
        })
        .collect::<Result<_>>()?;
    let mut hs = heights.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let rows = hs
        .into_iter()
        .map(|h| {
            let hits = firsts.iter().filter(|f| matches!(f, Some(q) if *q <= h)).count() as u64;
            let p = Proportion::new(hits, total);
            MeasureRow {
                q_max: h,
                hits,
                samples: total,
                fraction: p.fraction,
                ci_low: p.ci_low,
                ci_high: p.ci_high,
            }
        })
        .collect();
    Ok(MeasureReport { q_min, seed, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesClass {
    Diverges,
    Converges,
}

fn power_log_parts(psi: &ApproxFunction) -> Result<(&Rational, &Rational, &Rational)> {
    match psi {
        ApproxFunction::PowerLog { c, tau, sigma } => Ok((c, tau, sigma)),
        _ => Err(Error::invalid("series classification needs a power-log psi")),
    }
}

fn check_s(d: usize, n: usize, s: &Rational) -> Result<()> {
    if n == 0 || n > d || *s < 0 || *s > n as i64 {
        return Err(Error::invalid("need 1 <= n <= d and 0 <= s <= n"));
    }
    Ok(())
}

/// `sum psi(q)^(d-n+s) q^(n-s)` by exponent comparison.
pub fn divergence_classifier(psi: &ApproxFunction, d: usize, n: usize, s: &Rational) -> Result<SeriesClass> {
    check_s(d, n, s)?;
    let (_, tau, sigma) = power_log_parts(psi)?;
    let m = Rational::from(s + (d - n) as i64);
    let e = Rational::from((n as i64) - s) - Rational::from(tau * &m);
    let diverges = match e.cmp(&Rational::from(-1)) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => Rational::from(sigma * &m) <= 1,
    };
    Ok(if diverges { SeriesClass::Diverges } else { SeriesClass::Converges })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensationReport {
    pub k: u64,
    pub t_max: u64,
    /// `ln` of the partial sums at `T = 1, 2, 4, ...`.
    pub log_partial_sums: Vec<(u64, f64)>,
    /// Ratio of the last two dyadic block sums; `None` when `T < 4`.
    pub last_block_ratio: Option<f64>,
    pub growth: bool,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Partial sums of `sum_{t <= T} k^t psi(k^t)^(d-n+s) k^(t(n-s))`, in log space.
///
/// Growth means the last dyadic block sum is at least 0.99 of the previous one.
pub fn condensation_check(psi: &ApproxFunction, d: usize, n: usize, s: &Rational, k: u64, t_max: u64) -> Result<CondensationReport> {
    check_s(d, n, s)?;
    let (c, tau, sigma) = power_log_parts(psi)?;
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let (c, tau, sigma) = (c.to_f64(), tau.to_f64(), sigma.to_f64());
    let m = s.to_f64() + (d - n) as f64;
    let lk = (k as f64).ln();
    let ns = n as f64 - s.to_f64();
    let log_term = |t: u64| {
        let tf = t as f64;
        // ln(k^t + 1) = t ln k + ln(1 + k^-t)
        let lq1 = tf * lk + (-tf * lk).exp().ln_1p();
        let ln_psi = c.ln() - tau * tf * lk - sigma * lq1.ln();
        tf * lk * (1.0 + ns) + m * ln_psi
    };
    let mut acc = f64::NEG_INFINITY;
    let mut partial = Vec::new();
    let mut blocks = Vec::new();
    let mut block = f64::NEG_INFINITY;
    let mut next_mark = 1u64;
    for t in 1..=t_max {
        let lt = log_term(t);
        acc = log_add(acc, lt);
        block = log_add(block, lt);
        if t == next_mark {
            partial.push((t, acc));
            blocks.push(block);
            block = f64::NEG_INFINITY;
            next_mark *= 2;
        }
    }
    let last_block_ratio = if blocks.len() >= 3 {
        let j = blocks.len();
        Some((blocks[j - 1] - blocks[j - 2]).exp())
    } else {
        None
    };
    Ok(CondensationReport {
        k,
        t_max,
        log_partial_sums: partial,
        last_block_ratio,
        growth: last_block_ratio.is_some_and(|r| r > 0.99),
    })
}

/// `q^((s-n-1)/(d-n+s) - eps)`, whose condensed series converges.
pub fn hausdorff_cantelli_function(d: usize, n: usize, s: &Rational, eps: &Rational) -> Result<ApproxFunction> {
    check_s(d, n, s)?;
    if *eps <= 0 {
        return Err(Error::invalid("eps must be positive"));
    }
    let m = Rational::from(s + (d - n) as i64);
    let tau = Rational::from((n as i64) + 1 - s) / m + eps;
    ApproxFunction::power(tau)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionConfig {
    /// `None` for the ambient line, where the lift is `x` itself.
    #[serde(default)]
    pub subspace: Option<AffineSubspaceSpec>,
    #[serde(with = "crate::subspace::rational_str")]
    pub tau: Rational,
    /// Heights `2^j` for `j` in `[log2_q_min, log2_q_max]`.
    pub log2_q_min: u32,
    pub log2_q_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub tau: f64,
    /// Box sides `Q^-(1+tau)`, strictly decreasing.
    pub scales: Vec<f64>,
    pub heights: Vec<u64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub slope_ci: f64,
    pub formula_value: f64,
    pub residuals: Vec<f64>,
}

/// `n - (tau d - 1)/(tau + 1)`.
pub fn dimension_formula(n: usize, d: usize, tau: f64) -> f64 {
    n as f64 - (tau * d as f64 - 1.0) / (tau + 1.0)
}

/// Affine coordinates `x -> a x + b` of the lift beyond the first.
fn lift_forms(spec: Option<&AffineSubspaceSpec>) -> Vec<(f64, f64)> {
    match spec {
        None => Vec::new(),
        Some(s) => (0..s.codim()).map(|c| (s.tilt()[0][c].to_f64(), s.shift()[c].to_f64())).collect(),
    }
}

/// Box counts at level-matched scales.
///
/// At height `Q` the box side is `s = Q^-(1+tau)` and only `Q/2 < q <= Q`
/// contribute: the set `{x : ||q lift(x)|| < q^-tau}` is a union of intervals
/// whose lengths are comparable to `s`, and a box is hit when it meets one.
/// The grid origin is shifted by a seeded offset.
pub fn box_dimension(cfg: &DimensionConfig, seed: u64, precision: Precision, budget: u128) -> Result<DimensionEstimate> {
    let (n, d) = match &cfg.subspace {
        Some(s) => (s.n(), s.d()),
        None => (1, 1),
    };
    if n != 1 {
        return Err(Error::invalid("box counting is implemented for n = 1"));
    }
    if cfg.tau < Rational::from((1, d as i64)) {
        return Err(Error::invalid("need tau >= 1/d"));
    }
    if cfg.log2_q_min < 2 || cfg.log2_q_max <= cfg.log2_q_min || cfg.log2_q_max > 24 {
        return Err(Error::invalid("need 2 <= log2_q_min < log2_q_max <= 24"));
    }
    let tau = cfg.tau.to_f64();
    let forms = lift_forms(cfg.subspace.as_ref());
    let slack = 1.0 + forms.iter().map(|f| f.0.abs()).fold(0.0, f64::max);
    let offset = Sampler::new(seed, 1).jitter(0, 0).to_f64();
    let mut budget = Budget::new(budget);

    let mut heights = Vec::new();
    let mut scales = Vec::new();
    let mut counts = Vec::new();
    for j in cfg.log2_q_min..=cfg.log2_q_max {
        let q_hi = 1u64 << j;
        let s = (q_hi as f64).powf(-(1.0 + tau));
        let mut boxes: Vec<(i64, i64)> = Vec::new();
        let mut push = |lo: f64, hi: f64| {
            let (lo, hi) = (lo.max(0.0), hi.min(1.0));
            if lo < hi {
                boxes.push((((lo / s) + offset).floor() as i64, ((hi / s) + offset).floor() as i64));
            }
        };
        match &cfg.subspace {
            None => {
                budget.charge((q_hi as u128) * (q_hi as u128), "box counting")?;
                for q in q_hi / 2 + 1..=q_hi {
                    let r = (q as f64).powf(-tau) / q as f64;
                    for p in 0..=q as i64 {
                        let c = p as f64 / q as f64;
                        push(c - r, c + r);
                    }
                }
            }
            Some(spec) => {
                let e = CloseEnumerator::new(spec, precision, 0, q_hi as i64);
                for q in q_hi / 2 + 1..=q_hi {
                    let delta = (q as f64).powf(-tau);
                    // Necessary: ||q a0 + p a|| < delta (1 + |a|).
                    let wide = Rational::from_f64(delta * slack * (1.0 + 1e-9)).expect("finite");
                    let thr = Threshold::rational(&wide);
                    let qf = q as f64;
                    e.for_each(q as i64, &[(0, q as i64)], &thr, &mut budget, |p| {
                        let p = p[0] as f64;
                        let mut pieces = vec![((p - delta) / qf, (p + delta) / qf)];
                        for &(a, b) in &forms {
                            let mut next = Vec::new();
                            for &(l, h) in &pieces {
                                if a == 0.0 {
                                    let u = qf * b;
                                    if (u - u.round()).abs() < delta {
                                        next.push((l, h));
                                    }
                                    continue;
                                }
                                let (ya, yb) = (qf * (a * l + b), qf * (a * h + b));
                                let (ymin, ymax) = (ya.min(yb), ya.max(yb));
                                let r_lo = (ymin - delta).ceil() as i64;
                                let r_hi = (ymax + delta).floor() as i64;
                                for r in r_lo..=r_hi {
                                    let u1 = ((r as f64 - delta) / qf - b) / a;
                                    let u2 = ((r as f64 + delta) / qf - b) / a;
                                    let (u1, u2) = (u1.min(u2), u1.max(u2));
                                    let (nl, nh) = (l.max(u1), h.min(u2));
                                    if nl < nh {
                                        next.push((nl, nh));
                                    }
                                }
                            }
                            pieces = next;
                        }
                        for (l, h) in pieces {
                            push(l, h);
                        }
                    })?;
                }
            }
        }
        boxes.sort_unstable();
        let mut count = 0u64;
        let mut cur: Option<(i64, i64)> = None;
        for (a, b) in boxes {
            cur = match cur {
                Some((ca, cb)) if a <= cb + 1 => Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    count += (cb - ca + 1) as u64;
                    Some((a, b))
                }
                None => Some((a, b)),
            };
        }
        if let Some((ca, cb)) = cur {
            count += (cb - ca + 1) as u64;
        }
        heights.push(q_hi);
        scales.push(s);
        counts.push(count);
    }
    let xs: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c.max(1) as f64).ln()).collect();
    let (slope, slope_ci) = least_squares_slope(&xs, &ys);
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - my - slope * (x - mx)).collect();
    Ok(DimensionEstimate {
        tau,
        scales,
        heights,
        counts,
        slope,
        slope_ci,
        formula_value: dimension_formula(n, d, tau),
        residuals,
    })
}

/// For resonant `p^` and `|x - p/q| < Psi(q)`, checks `|lift(x) - m/q| < psi(q)/q`
/// with `m = (p, round(q a0 + p a))`. Returns `None` when a premise fails.
pub fn lift_transfer_check(
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    p_hat: &HattedVector,
    x: &[ExactReal],
    precision: Precision,
) -> Result<Option<bool>> {
    let q = p_hat.q;
    let qu = q as u64;
    let aug = spec.augmented();
    let half = psi.threshold(qu, &Rational::from((1, 2)));
    let mut m = Vec::new();
    for c in 0..spec.codim() {
        let mut v = aug[0][c].mul_i64(q);
        for (i, &pi) in p_hat.p.iter().enumerate() {
            v = v.add(&aug[i + 1][c].mul_i64(pi));
        }
        if !norm::dist_lt(&v, &half, precision)? {
            return Ok(None);
        }
        // Nearest integer; ties cannot occur below psi/2 < 1/2.
        m.push(v.add(&ExactReal::from_ratio(1, 2)).floor());
    }
    let cap = psi_capital_threshold(qu, psi, spec)?;
    let inv_q = Rational::from((1, q));
    for (xi, &pi) in x.iter().zip(&p_hat.p) {
        let dev = xi.sub(&ExactReal::from_rational(&Rational::from((pi, q))));
        if !crate::lattice::abs_below(&dev, &cap, true, precision)? {
            return Ok(None);
        }
    }
    let y = lift(x, spec)?;
    let target = psi.threshold(qu, &inv_q);
    for (c, mc) in m.into_iter().enumerate() {
        let dev = y[spec.n() + c].sub(&ExactReal::from_rational(&Rational::from((mc, rug::Integer::from(q)))));
        if !crate::lattice::abs_below(&dev, &target, true, precision)? {
            return Ok(Some(false));
        }
    }
    Ok(Some(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sqrt2_line() -> AffineSubspaceSpec {
        AffineSubspaceSpec::line(ExactReal::sqrt(2), ExactReal::zero())
    }

    fn power(p: i64, q: i64) -> ApproxFunction {
        ApproxFunction::power(Rational::from((p, q))).unwrap()
    }

    #[test]
    fn rational_lift_hits_common_denominator() {
        let spec = AffineSubspaceSpec::line(ExactReal::from_ratio(1, 3), ExactReal::from_ratio(1, 5));
        let x = vec![ExactReal::from_ratio(2, 7)];
        let psi = ApproxFunction::table(vec![(1, Rational::from((1, 1_000_000)))]).unwrap();
        let v = is_approximable_upto(&x, &spec, &psi, 200, Precision::default()).unwrap();
        // lift = (2/7, 2/21 + 1/5) = (2/7, 52/105)
        assert_eq!(v.first_q, Some(105));
    }

    #[test]
    fn verdict_agrees_at_doubled_precision() {
        let s = Sampler::new(11, 1);
        let x = s.exact_point(&Ball::unit(1), 0);
        let psi = ApproxFunction::power_log(Rational::from((1, 3)), Rational::from(1), Rational::new()).unwrap();
        let a = is_approximable_upto(&x, &sqrt2_line(), &psi, 100_000, Precision::new(128, 4096)).unwrap();
        let b = is_approximable_upto(&x, &sqrt2_line(), &psi, 100_000, Precision::new(256, 8192)).unwrap();
        assert_eq!(a.first_q, b.first_q);
    }

    #[test]
    fn truncation_monotone() {
        let x = Sampler::new(5, 1).exact_point(&Ball::unit(1), 0);
        let psi = power(1, 2);
        let a = is_approximable_upto(&x, &sqrt2_line(), &psi, 1_000, Precision::default()).unwrap();
        let b = is_approximable_upto(&x, &sqrt2_line(), &psi, 10_000, Precision::default()).unwrap();
        if let Some(q) = a.first_q {
            assert_eq!(b.first_q, Some(q));
        }
    }

    #[test]
    fn constant_psi_gives_full_measure() {
        let psi = ApproxFunction::constant(Rational::from((49, 100))).unwrap();
        let r = empirical_measure(&sqrt2_line(), &psi, &[50], 400, 1, 0, Precision::default(), u128::MAX).unwrap();
        assert!(r.rows[0].fraction > 0.99);
    }

    #[test]
    fn measure_increases_with_height() {
        let r = empirical_measure(&sqrt2_line(), &power(1, 2), &[20, 25, 400], 300, 20, 4, Precision::default(), u128::MAX).unwrap();
        assert!(r.increasing());
        assert!(r.rows[2].fraction > r.rows[0].fraction);
        assert!(r.csv().starts_with("Q,fraction,ci_low,ci_high\n"));
    }

    #[test]
    fn classifier_examples() {
        let one = Rational::from(1);
        assert_eq!(divergence_classifier(&power(1, 2), 2, 1, &one).unwrap(), SeriesClass::Diverges);
        assert_eq!(divergence_classifier(&power(1, 1), 2, 1, &one).unwrap(), SeriesClass::Converges);
        let half = Rational::from((1, 2));
        assert_eq!(divergence_classifier(&power(1, 1), 2, 1, &half).unwrap(), SeriesClass::Diverges);
        assert_eq!(divergence_classifier(&power(101, 100), 2, 1, &half).unwrap(), SeriesClass::Converges);
        let table = ApproxFunction::table(vec![(1, Rational::from(1))]).unwrap();
        assert!(divergence_classifier(&table, 2, 1, &one).is_err());
    }

    #[test]
    fn condensation_examples() {
        let one = Rational::from(1);
        let div = condensation_check(&power(1, 2), 2, 1, &one, 2, 1 << 12).unwrap();
        assert!(div.growth);
        // Constant terms: partial sum at T equals T.
        let (t, ls) = *div.log_partial_sums.last().unwrap();
        assert!((ls - (t as f64).ln()).abs() < 1e-9);
        let conv = condensation_check(&power(1, 1), 2, 1, &one, 2, 1 << 12).unwrap();
        assert!(!conv.growth);
        let empty = condensation_check(&power(1, 1), 2, 1, &one, 2, 0).unwrap();
        assert!(empty.log_partial_sums.is_empty() && !empty.growth);
    }

    #[test]
    fn hausdorff_cantelli_converges() {
        for e in [1i64, 5, 50] {
            let eps = Rational::from((e, 100));
            let phi = hausdorff_cantelli_function(2, 1, &Rational::from(1), &eps).unwrap();
            assert_eq!(divergence_classifier(&phi, 2, 1, &Rational::from(1)).unwrap(), SeriesClass::Converges);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn classifier_matches_condensation(t4 in 0i64..12, s2 in 0i64..3, g4 in 0i64..10, d in 2usize..4) {
            let n = 1usize;
            let s = Rational::from((s2, 2));
            let psi = ApproxFunction::power_log(Rational::from(1), Rational::from((t4, 4)), Rational::from((g4, 4))).unwrap();
            let cls = divergence_classifier(&psi, d, n, &s).unwrap();
            let cond = condensation_check(&psi, d, n, &s, 3, 1 << 14).unwrap();
            prop_assert_eq!(cls == SeriesClass::Diverges, cond.growth);
        }
    }

    #[test]
    fn dimension_formula_values() {
        assert!((dimension_formula(1, 2, 0.5) - 1.0).abs() < 1e-15);
        assert!((dimension_formula(1, 2, 0.8) - 2.0 / 3.0).abs() < 1e-12);
        assert!((dimension_formula(1, 1, 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jarnik_small() {
        let cfg = DimensionConfig { subspace: None, tau: Rational::from(3), log2_q_min: 4, log2_q_max: 8 };
        let est = box_dimension(&cfg, 0, Precision::default(), u128::MAX).unwrap();
        assert!(est.scales.windows(2).all(|w| w[1] < w[0]));
        assert!(est.counts.windows(2).all(|w| w[1] >= w[0]));
        assert!((est.slope - 0.5).abs() < 0.1, "{est:?}");
    }

    #[test]
    fn lift_transfer_on_resonant_points() {
        let spec = AffineSubspaceSpec::line(ExactReal::sqrt(2), ExactReal::from_ratio(1, 7));
        let psi = power(1, 2);
        let mut checked = 0;
        crate::ubiquity::for_each_resonant(&spec, &psi, 1, 60, Precision::default(), &mut Budget::unlimited(), |q, p| {
            let ph = HattedVector { q, p: p.to_vec() };
            let cap = psi_capital_threshold(q as u64, &psi, &spec).unwrap().to_f64();
            for f in [-0.999, -0.5, 0.0, 0.5, 0.999] {
                let x = Rational::from((p[0], q)) + Rational::from_f64(f * cap).unwrap();
                if x < 0 || x > 1 {
                    continue;
                }
                let r = lift_transfer_check(&spec, &psi, &ph, &[ExactReal::from_rational(&x)], Precision::default()).unwrap();
                assert_eq!(r, Some(true));
                checked += 1;
            }
        })
        .unwrap();
        assert!(checked > 50);
    }
}
