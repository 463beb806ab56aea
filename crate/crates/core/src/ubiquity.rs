//! Resonant points near the subspace, the ubiquity radius, and measured
//! coverage of a ball by level-`t` resonant balls.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::approx_fn::{ApproxFunction, Threshold};
use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::interval::Interval;
use crate::lattice::{abs_below, containment_bounds, scale_threshold};
use crate::precision::Precision;
use crate::sampler::{Proportion, Sampler};
use crate::subspace::{AffineSubspaceSpec, Ball, ClosenessKernel, FastVerdict, HattedVector, StripIndex};
use crate::window::{Budget, CloseEnumerator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantPoint {
    pub p_hat: HattedVector,
    /// Enclosure of `||p^ a~||`.
    pub closeness: (f64, f64),
}

impl ResonantPoint {
    pub fn weight(&self) -> i64 {
        self.p_hat.q
    }

    pub fn point(&self) -> Vec<Rational> {
        self.p_hat.p.iter().map(|&p| Rational::from((p, self.p_hat.q))).collect()
    }
}

/// Calls `visit(q, p)` for every `p/q` in `[0,1]^n` with `||p^ a~|| < psi(q)/2`
/// and `q_lo <= q <= q_hi`, ordered by `q` then `p`.
pub fn for_each_resonant(
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    q_lo: u64,
    q_hi: u64,
    precision: Precision,
    budget: &mut Budget,
    visit: impl FnMut(i64, &[i64]),
) -> Result<()> {
    let origin = StripIndex::new(vec![0; spec.n()]);
    for_each_resonant_in_strip(spec, psi, &origin, q_lo, q_hi, precision, budget, visit)
}

/// As [`for_each_resonant`] over the strip `S_v`, i.e. `p/q` in `v + [0,1]^n`.
#[allow(clippy::too_many_arguments)]
pub fn for_each_resonant_in_strip(
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    strip: &StripIndex,
    q_lo: u64,
    q_hi: u64,
    precision: Precision,
    budget: &mut Budget,
    mut visit: impl FnMut(i64, &[i64]),
) -> Result<()> {
    let q_lo = q_lo.max(1);
    if q_hi >= 1 << 40 || strip.v.iter().any(|v| v.unsigned_abs() > 1 << 20) {
        return Err(Error::invalid("resonant enumeration height too large"));
    }
    if strip.v.len() != spec.n() {
        return Err(Error::invalid("strip index has wrong dimension"));
    }
    let last = strip.v[spec.n() - 1];
    let qh = q_hi as i64;
    let (pmin, pmax) = ((last * qh).min(last * q_lo as i64), ((last + 1) * qh).max((last + 1) * q_lo as i64));
    let e = CloseEnumerator::new(spec, precision, pmin, pmax);
    let half = Rational::from((1, 2));
    for q in q_lo..=q_hi {
        let thr = psi.threshold(q, &half);
        let qi = q as i64;
        let ranges: Vec<(i64, i64)> = strip.v.iter().map(|&v| (v * qi, (v + 1) * qi)).collect();
        e.for_each(qi, &ranges, &thr, budget, |p| visit(qi, p))?;
    }
    Ok(())
}

/// All resonant points with `q <= q_max`, with certified closeness.
pub fn resonant_points(
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    q_max: u64,
    precision: Precision,
    budget: &mut Budget,
) -> Result<Vec<ResonantPoint>> {
    let mut raw = Vec::new();
    for_each_resonant(spec, psi, 1, q_max, precision, budget, |q, p| raw.push((q, p.to_vec())))?;
    let kernel = ClosenessKernel::new(spec, precision);
    raw.into_iter()
        .map(|(q, p)| {
            let c = kernel.closeness(q, &p)?;
            Ok(ResonantPoint {
                closeness: (c.lo_f64(), c.hi_f64()),
                p_hat: HattedVector { q, p },
            })
        })
        .collect()
}

pub fn resonant_count(
    spec: &AffineSubspaceSpec,
    psi: &ApproxFunction,
    q_lo: u64,
    q_hi: u64,
    precision: Precision,
    budget: &mut Budget,
) -> Result<u64> {
    let mut c = 0;
    for_each_resonant(spec, psi, q_lo, q_hi, precision, budget, |_, _| c += 1)?;
    Ok(c)
}

/// `q,p1..pn,closeness_hi,rho` with `rho = rho(q)`.
pub fn resonant_csv(points: &[ResonantPoint], psi: &ApproxFunction, d: usize, n: usize) -> String {
    let mut s = String::from("q");
    for i in 1..=n {
        s.push_str(&format!(",p{i}"));
    }
    s.push_str(",closeness_hi,rho\n");
    for r in points {
        s.push_str(&r.p_hat.q.to_string());
        for p in &r.p_hat.p {
            s.push_str(&format!(",{p}"));
        }
        let rho = rho_threshold(r.p_hat.q as u64, psi, d, n).to_f64();
        s.push_str(&format!(",{:.17e},{:.17e}\n", r.closeness.1, rho));
    }
    s
}

/// `rho(q) = 2^((d-n)/n) / (q^((n+1)/n) psi(q)^((d-n)/n))`.
pub fn rho_threshold(q: u64, psi: &ApproxFunction, d: usize, n: usize) -> Threshold {
    let (_, mid, _) = containment_bounds(q, psi, d, n);
    let inv = Rational::from((1, q));
    match mid.exact_value() {
        Some(e) => Threshold::exact(e.mul_rational(&inv)),
        None => Threshold::from_fn(move |prec| mid.enclose(prec).mul_rational(&inv)),
    }
}

pub fn rho(q: u64, psi: &ApproxFunction, d: usize, n: usize, bits: u32) -> Interval {
    rho_threshold(q, psi, d, n).enclose(bits)
}

/// `2^((n+d)/(n+1)) 3^((n+d+2)/(n+1))`.
pub fn min_k(n: usize, d: usize, bits: u32) -> Interval {
    let e1 = Interval::from_rational(&Rational::from(((n + d) as i64, (n + 1) as i64)), bits);
    let e2 = Interval::from_rational(&Rational::from(((n + d + 2) as i64, (n + 1) as i64)), bits);
    Interval::from_i64(2, bits).pow(&e1).mul(&Interval::from_i64(3, bits).pow(&e2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// `(t, Psi(k^(t+1)) / Psi(k^t))`.
    pub ratios: Vec<(u32, f64)>,
}

/// Checks `Psi(k^(t+1)) <= Psi(k^t) / k`, i.e. `psi(k^(t+1)) <= psi(k^t)`.
pub fn regularity_check(psi: &ApproxFunction, k: u64, t_lo: u32, t_hi: u32, bits: u32) -> Result<RegularityReport> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let mut ratios = Vec::new();
    let mut regular = true;
    for t in t_lo..=t_hi {
        let a = Integer::from(k).pow(t);
        let b = Integer::from(k).pow(t + 1);
        if a.significant_bits() > 4000 {
            break;
        }
        let (pa, pb) = (psi.eval(&a, bits), psi.eval(&b, bits));
        let ratio = pb.div(&pa).mul_rational(&Rational::from((1, k)));
        // psi is non-increasing by construction; equal values are allowed.
        let ok = match (psi.exact_value(&a), psi.exact_value(&b)) {
            (Some(x), Some(y)) => y.cmp_exact(&x) != std::cmp::Ordering::Greater,
            _ => match pb.le(&pa) {
                Some(r) => r,
                None => psi.is_power_log(),
            },
        };
        regular &= ok;
        ratios.push((t, ratio.mid_f64()));
    }
    Ok(RegularityReport { regular, ratios })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverConfig {
    pub subspace: AffineSubspaceSpec,
    pub psi: ApproxFunction,
    pub k: u64,
    pub t: u32,
    pub ball: Ball,
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Multiplies `rho(k^t)`.
    #[serde(default = "one", with = "crate::subspace::rational_str")]
    pub rho_scale: Rational,
    #[serde(default)]
    pub kappa_target: f64,
}

fn default_samples() -> u64 {
    10_000
}

fn one() -> Rational {
    Rational::from(1)
}

impl CoverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ball.dim() != self.subspace.n() {
            return Err(Error::invalid("ball dimension must equal n"));
        }
        if self.k < 2 || self.t < 1 {
            return Err(Error::invalid("need k >= 2 and t >= 1"));
        }
        if self.rho_scale <= 0 {
            return Err(Error::invalid("rho_scale must be positive"));
        }
        let top = (self.k as f64).powi(self.t as i32);
        if top >= (1u64 << 40) as f64 {
            return Err(Error::invalid("k^t too large"));
        }
        Ok(())
    }

    pub fn level(&self) -> (u64, u64) {
        (self.k.pow(self.t - 1), self.k.pow(self.t))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub k: u64,
    pub t: u32,
    pub ball: Ball,
    pub fraction: f64,
    pub hits: u64,
    pub samples: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub kappa_target: f64,
    pub grid_resolution: u64,
    pub seed: u64,
    pub rho: f64,
}

impl CoverReport {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Fraction of jittered samples of `B` within `rho(k^t)` (sup norm) of a
/// resonant `p/q` with `k^(t-1) < q <= k^t`.
pub fn covering_fraction(cfg: &CoverConfig, seed: u64, precision: Precision, budget: u128) -> Result<CoverReport> {
    cfg.validate()?;
    let (spec, n) = (&cfg.subspace, cfg.subspace.n());
    let (q_lo, q_hi) = cfg.level();
    let sampler = Sampler::with_at_least(seed, cfg.samples, n);
    let total = sampler.count(n);
    Budget::new(budget).charge(total as u128 * (q_hi - q_lo) as u128, "covering fraction")?;

    let base = rho_threshold(q_hi, &cfg.psi, spec.d(), n);
    let rho_t = match base.exact_value() {
        Some(e) => Threshold::exact(e.mul_rational(&cfg.rho_scale)),
        None => {
            let s = cfg.rho_scale.clone();
            Threshold::from_fn(move |prec| base.enclose(prec).mul_rational(&s))
        }
    };
    let rho_hi = rho_t.bounds().hi;
    let kernel = ClosenessKernel::new(spec, precision);
    let half = Rational::from((1, 2));

    let covered = |index: u64| -> Result<bool> {
        let x = sampler.point(&cfg.ball, index);
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
        let mut p = vec![0i64; n];
        let mut lo = vec![0i64; n];
        let mut hi = vec![0i64; n];
        'q: for q in q_lo + 1..=q_hi {
            let qf = q as f64;
            let r = qf * rho_hi * (1.0 + 1e-12) + qf * 1e-15 + 1e-300;
            for j in 0..n {
                let u = qf * xf[j];
                lo[j] = ((u - r).ceil() as i64).max(0);
                hi[j] = ((u + r).floor() as i64).min(q as i64);
                if lo[j] > hi[j] {
                    continue 'q;
                }
            }
            p.copy_from_slice(&lo);
            loop {
                if hit(&kernel, &cfg.psi, &half, q, &p, &x, &rho_t, precision)? {
                    return Ok(true);
                }
                let mut j = 0;
                loop {
                    if j == n {
                        continue 'q;
                    }
                    if p[j] < hi[j] {
                        p[j] += 1;
                        break;
                    }
                    p[j] = lo[j];
                    j += 1;
                }
            }
        }
        Ok(false)
    };

    let hits: u64 = (0..total)
        .into_par_iter()
        .map(|i| covered(i).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let prop = Proportion::new(hits, total);
    Ok(CoverReport {
        k: cfg.k,
        t: cfg.t,
        ball: cfg.ball.clone(),
        fraction: prop.fraction,
        hits,
        samples: total,
        ci_low: prop.ci_low,
        ci_high: prop.ci_high,
        kappa_target: cfg.kappa_target,
        grid_resolution: sampler.per_axis,
        seed,
        rho: rho_t.to_f64(),
    })
}

#[allow(clippy::too_many_arguments)]
fn hit(
    kernel: &ClosenessKernel,
    psi: &ApproxFunction,
    half: &Rational,
    q: u64,
    p: &[i64],
    x: &[Rational],
    rho_t: &Threshold,
    precision: Precision,
) -> Result<bool> {
    let qi = q as i64;
    let thr = psi.threshold(q, half);
    if kernel.fast_test(qi, p, &thr.bounds()) == FastVerdict::Outside {
        return Ok(false);
    }
    let scaled = scale_threshold(rho_t, qi);
    for (xj, &pj) in x.iter().zip(p) {
        let dev = ExactReal::from_rational(&(Rational::from(xj * q) - pj));
        if !abs_below(&dev, &scaled, true, precision)? {
            return Ok(false);
        }
    }
    kernel.is_close(qi, p, &thr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UbiquityReport {
    pub min_k: f64,
    pub k_above_threshold: bool,
    pub regularity: RegularityReport,
    pub levels: Vec<CoverReport>,
    /// Smallest measured fraction over the tested levels.
    pub kappa: f64,
    /// All fractions positive and within a factor 2 of each other at consecutive levels.
    pub stable: bool,
    pub max_half_width: f64,
}

impl UbiquityReport {
    pub fn passed(&self) -> bool {
        self.k_above_threshold && self.regularity.regular && self.stable && self.max_half_width < 0.02
    }
}

/// Coverage at levels `t_lo..=t_hi` plus the `k` threshold and regularity.
pub fn verify_ubiquity(cfg: &CoverConfig, t_lo: u32, t_hi: u32, seed: u64, precision: Precision, budget: u128) -> Result<UbiquityReport> {
    let (d, n) = (cfg.subspace.d(), cfg.subspace.n());
    let mk = min_k(n, d, 128);
    let k_above = mk.lt(&Interval::from_integer(&Integer::from(cfg.k), 128)) == Some(true);
    let regularity = regularity_check(&cfg.psi, cfg.k, t_lo.max(1), t_hi, 128)?;
    let mut levels = Vec::new();
    for t in t_lo..=t_hi {
        let c = CoverConfig { t, ..cfg.clone() };
        levels.push(covering_fraction(&c, seed, precision, budget)?);
    }
    let kappa = levels.iter().map(|r| r.fraction).fold(f64::INFINITY, f64::min);
    let stable = levels.iter().all(|r| r.hits > 0 && r.fraction >= r.kappa_target)
        && levels.windows(2).all(|w| w[0].fraction <= 2.0 * w[1].fraction && w[1].fraction <= 2.0 * w[0].fraction);
    let max_half_width = levels.iter().map(|r| r.half_width()).fold(0.0, f64::max);
    Ok(UbiquityReport {
        min_k: mk.mid_f64(),
        k_above_threshold: k_above,
        regularity,
        levels,
        kappa,
        stable,
        max_half_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::strip_translate;

    fn sqrt2_line() -> AffineSubspaceSpec {
        AffineSubspaceSpec::line(ExactReal::sqrt(2), ExactReal::zero())
    }

    fn half_power() -> ApproxFunction {
        ApproxFunction::power(Rational::from((1, 2))).unwrap()
    }

    #[test]
    fn small_resonant_set() {
        let pts = resonant_points(&sqrt2_line(), &half_power(), 5, Precision::default(), &mut Budget::unlimited()).unwrap();
        assert!(pts.iter().any(|r| r.p_hat.q == 5 && r.p_hat.p == [2]));
        for r in &pts {
            let bound = (r.p_hat.q as f64).powf(-0.5) / 2.0;
            assert!(r.closeness.1 < bound + 1e-12);
        }
        // p = 0 always gives ||0|| = 0.
        assert!(pts.iter().filter(|r| r.p_hat.p == [0]).count() == 5);
    }

    #[test]
    fn large_shift_excludes_q1() {
        let spec = AffineSubspaceSpec::line(ExactReal::zero(), ExactReal::from_ratio(1, 2));
        let psi = ApproxFunction::constant(Rational::from((1, 2))).unwrap();
        let n = resonant_count(&spec, &psi, 1, 1, Precision::default(), &mut Budget::unlimited()).unwrap();
        assert_eq!(n, 0);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_threshold(100, &half_power(), 2, 1).exact_value(), Some(&ExactReal::from_ratio(1, 500)));
        let one = ApproxFunction::constant(Rational::from(1)).unwrap();
        assert_eq!(rho_threshold(1, &one, 3, 1).exact_value(), Some(&ExactReal::from_i64(4)));
        assert!(rho(1, &one, 3, 2, 128).contains_f64(2f64.sqrt()) || rho(1, &one, 3, 2, 128).width_at_most_pow2(100));
    }

    #[test]
    fn min_k_examples() {
        let a = min_k(1, 2, 128);
        assert!(a.lo_f64() > 44.09 && a.hi_f64() < 44.10);
        let b = min_k(2, 3, 128);
        assert!(b.lo_f64() > 41.2 && b.hi_f64() < 41.22);
        assert!(min_k(1, 3, 128).lo_f64() > a.hi_f64());
    }

    #[test]
    fn regularity() {
        let r = regularity_check(&half_power(), 45, 1, 5, 128).unwrap();
        assert!(r.regular);
        assert!((r.ratios[0].1 - 45f64.powf(-1.5)).abs() < 1e-12);
        let c = regularity_check(&ApproxFunction::constant(Rational::from(1)).unwrap(), 7, 1, 3, 128).unwrap();
        assert!(c.regular);
        assert!((c.ratios[0].1 - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn strip_translation_preserves_resonant_sets() {
        let spec = AffineSubspaceSpec::line(ExactReal::sqrt(3), ExactReal::from_ratio(1, 5));
        let psi = half_power();
        let pr = Precision::default();
        for v in [-1i64, 0, 1] {
            let strip = StripIndex::new(vec![v]);
            let moved = strip_translate(&spec, &strip).unwrap();
            let mut a = Vec::new();
            for_each_resonant(&moved, &psi, 1, 300, pr, &mut Budget::unlimited(), |q, p| a.push((q, p[0] + v * q))).unwrap();
            let mut b = Vec::new();
            for_each_resonant_in_strip(&spec, &psi, &strip, 1, 300, pr, &mut Budget::unlimited(), |q, p| b.push((q, p[0]))).unwrap();
            assert_eq!(a, b);
            assert!(!a.is_empty());
        }
        // Integer shifts of a0 leave everything unchanged.
        let up = AffineSubspaceSpec::line(ExactReal::sqrt(3), ExactReal::from_ratio(6, 5));
        let c0 = resonant_count(&spec, &psi, 1, 300, pr, &mut Budget::unlimited()).unwrap();
        let c1 = resonant_count(&up, &psi, 1, 300, pr, &mut Budget::unlimited()).unwrap();
        assert_eq!(c0, c1);
    }

    fn cover(t: u32, scale: i64) -> CoverReport {
        let cfg = CoverConfig {
            subspace: sqrt2_line(),
            psi: half_power(),
            k: 12,
            t,
            ball: Ball::unit(1),
            samples: 2000,
            rho_scale: Rational::from(scale),
            kappa_target: 0.0,
        };
        covering_fraction(&cfg, 3, Precision::default(), u128::MAX).unwrap()
    }

    #[test]
    fn coverage_is_monotone_in_radius() {
        let a = cover(2, 1);
        let b = cover(2, 2);
        assert!(a.hits > 0);
        assert!(b.hits >= a.hits);
        let full = cover(2, 1_000_000);
        assert_eq!(full.fraction, 1.0);
    }

    #[test]
    fn empty_level_gives_zero() {
        // ||q sqrt 3 + p sqrt 2|| stays far above psi for q, p <= 5.
        let cfg = CoverConfig {
            subspace: AffineSubspaceSpec::line(ExactReal::sqrt(2), ExactReal::sqrt(3)),
            psi: ApproxFunction::table(vec![(1, Rational::from((1, 1_000_000)))]).unwrap(),
            k: 5,
            t: 1,
            ball: Ball::new(vec![ExactReal::from_ratio(1, 2)], Rational::from((1, 4))).unwrap(),
            samples: 500,
            rho_scale: Rational::from(1),
            kappa_target: 0.0,
        };
        let r = covering_fraction(&cfg, 0, Precision::default(), u128::MAX).unwrap();
        assert_eq!(r.hits, 0);
    }
}
