//! Exact counts of rational points near the subspace and the two upper bounds
//! they are checked against.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::approx_fn::{ApproxFunction, Threshold};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::precision::Precision;
use crate::subspace::{AffineSubspaceSpec, Ball, ClosenessKernel};
use crate::window::{Budget, CloseEnumerator};

/// Number of `p in N^n` with `||p^ a~|| < delta` and `|p - q x0| < q eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountConfig {
    pub subspace: AffineSubspaceSpec,
    pub q: i64,
    #[serde(with = "crate::subspace::rational_str")]
    pub delta: Rational,
    pub ball: Ball,
}

impl CountConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q < 1 {
            return Err(Error::invalid("count: q must be at least 1"));
        }
        if self.delta <= 0 {
            return Err(Error::invalid("count: delta must be positive"));
        }
        if self.ball.dim() != self.subspace.n() {
            return Err(Error::invalid("count: ball dimension differs from n"));
        }
        Ok(())
    }

    /// `q < 1/(2 eta)`, the single-point regime.
    pub fn single_point_regime(&self) -> bool {
        Rational::from(&self.ball.radius * (2 * self.q)) < 1
    }
}

/// Integer ranges of `p` in `N^n` with `|p - q x0| < q eta`.
fn positive_box(ball: &Ball, q: i64) -> Vec<(i64, i64)> {
    ball.integer_box(q)
        .into_iter()
        .map(|(lo, hi)| (lo.to_i64().unwrap().max(1), hi.to_i64().unwrap()))
        .collect()
}

fn box_size(ranges: &[(i64, i64)]) -> u128 {
    ranges
        .iter()
        .map(|&(a, b)| if b >= a { (b - a + 1) as u128 } else { 0 })
        .product()
}

/// Exact cardinality by enumeration of the integer box with certified tests.
pub fn count_exact(cfg: &CountConfig, precision: Precision, budget: u128) -> Result<u64> {
    cfg.validate()?;
    let ranges = positive_box(&cfg.ball, cfg.q);
    let size = box_size(&ranges);
    if size == 0 {
        return Ok(0);
    }
    if size > budget {
        return Err(Error::BudgetExceeded {
            needed: size,
            budget,
            context: "count_exact box".into(),
        });
    }
    let thr = Threshold::rational(&cfg.delta);
    let kernel = ClosenessKernel::new(&cfg.subspace, precision);
    let tb = thr.bounds();
    let n = ranges.len();
    let mut p: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut count = 0u64;
    loop {
        use crate::subspace::FastVerdict::*;
        match kernel.fast_test(cfg.q, &p, &tb) {
            Inside => count += 1,
            Outside => {}
            Undecided => {
                if kernel.is_close(cfg.q, &p, &thr)? {
                    count += 1;
                }
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(count);
            }
            i -= 1;
            if p[i] < ranges[i].1 {
                p[i] += 1;
                for j in i + 1..n {
                    p[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

/// `3^d delta^(d-n) q^n m(B) + C delta^(d-n-omega) log(1/delta - 1)^n`.
pub fn lemma3_bound(q: i64, delta: &Rational, m_b: &Rational, omega: f64, c: f64, d: usize, n: usize) -> Result<Interval> {
    if *delta <= 0 || *delta >= Rational::from((1, 2)) {
        return Err(Error::invalid("lemma3_bound: delta must lie in (0, 1/2)"));
    }
    let prec = 128;
    let dl = Interval::from_rational(delta, prec);
    let m = (d - n) as u32;
    let first = Interval::from_i64(3, prec)
        .powi(d as u32)
        .mul(&dl.powi(m))
        .mul(&Interval::from_i64(q, prec).powi(n as u32))
        .mul(&Interval::from_rational(m_b, prec));
    let lg = Interval::from_rational(&Rational::from(delta.clone().recip() - 1u32), prec).ln();
    let expo = Interval::from_f64(m as f64 - omega);
    let second = Interval::from_f64(c)
        .mul(&dl.pow(&expo))
        .mul(&lg.powi(n as u32));
    Ok(first.add(&second))
}

/// Constant for [`lemma3_bound`]: `2^(omega-d+n)` times the smallest `C` with
/// `sum_{0<|j|<=J} prod_u ||j . a_u||^-1 <= C J^omega (log J)^n` on `grid`.
pub fn single_bound_constant(spec: &AffineSubspaceSpec, omega: f64, grid: &[i64], precision: Precision) -> Result<f64> {
    let fit = crate::madsum::fit_sum_constant(spec.tilt(), omega, spec.n() as u32, grid, precision)?;
    Ok(2f64.powf(omega - spec.codim() as f64) * fit.c)
}

/// `3^(d+n+2) psi(k^t)^(d-n) k^((t-1)(n+1)) m(B)`.
pub fn theorem4_bound(k: u64, t: u32, psi: &ApproxFunction, m_b: &Rational, d: usize, n: usize) -> Interval {
    let prec = 128;
    let kt = Integer::from(k).pow(t);
    let kt1 = Integer::from(k).pow((t - 1) * (n as u32 + 1));
    Interval::from_i64(3, prec)
        .powi((d + n + 2) as u32)
        .mul(&psi.eval(&kt, prec).powi((d - n) as u32))
        .mul(&Interval::from_integer(&kt1, prec))
        .mul(&Interval::from_rational(m_b, prec))
}

/// Aggregate count at level `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateConfig {
    pub subspace: AffineSubspaceSpec,
    pub psi: ApproxFunction,
    pub k: u64,
    pub t: u32,
    pub ball: Ball,
}

impl AggregateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.t < 1 {
            return Err(Error::invalid("aggregate: need k >= 2 and t >= 1"));
        }
        if self.ball.dim() != self.subspace.n() {
            return Err(Error::invalid("aggregate: ball dimension differs from n"));
        }
        Ok(())
    }

    /// `k^(t-1)`.
    pub fn q_max(&self) -> Result<i64> {
        Integer::from(self.k)
            .pow(self.t - 1)
            .to_i64()
            .filter(|&v| v < 1 << 40)
            .ok_or_else(|| Error::BudgetExceeded {
                needed: u128::MAX,
                budget: 1 << 40,
                context: "k^(t-1) too large".into(),
            })
    }
}

/// `#{(q, p): 1 <= q <= k^(t-1), p in N^n, |p - q x0| < q eta, ||p^ a~|| < psi(k^t)/2}`.
pub fn count_aggregate(cfg: &AggregateConfig, precision: Precision, budget: u128) -> Result<u64> {
    cfg.validate()?;
    let q_max = cfg.q_max()?;
    // The outer loop visits each q and every prefix of p; charge that up front.
    let outer: u128 = (1..=q_max)
        .map(|q| {
            let r = positive_box(&cfg.ball, q);
            box_size(&r[..r.len() - 1]).max(1)
        })
        .sum();
    if outer > budget {
        return Err(Error::BudgetExceeded {
            needed: outer,
            budget,
            context: "count_aggregate outer loop".into(),
        });
    }
    let kt = Integer::from(cfg.k).pow(cfg.t);
    let kt = kt.to_u64().ok_or_else(|| Error::invalid("k^t exceeds u64"))?;
    let thr = cfg.psi.threshold(kt, &Rational::from((1, 2)));
    let p_hi = positive_box(&cfg.ball, q_max).last().map(|r| r.1).unwrap_or(0).max(1);
    let en = CloseEnumerator::new(&cfg.subspace, precision, 1, p_hi);
    let chunks: Vec<(i64, i64)> = (0..)
        .map(|i| (1 + i * 1024, ((i + 1) * 1024).min(q_max)))
        .take_while(|c| c.0 <= q_max)
        .collect();
    let parts: Vec<Result<(u64, u128)>> = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut local = Budget::new(budget);
            let mut c = 0u64;
            for q in a..=b {
                let ranges = positive_box(&cfg.ball, q);
                c += en.count(q, &ranges, &thr, &mut local)?;
            }
            Ok((c, local.used))
        })
        .collect();
    let mut total = 0u64;
    let mut used = 0u128;
    for p in parts {
        let (c, u) = p?;
        total += c;
        used += u;
    }
    if used > budget {
        return Err(Error::BudgetExceeded {
            needed: used,
            budget,
            context: "count_aggregate membership tests".into(),
        });
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `single` or `aggregate`.
    pub kind: String,
    /// `q` for single counts, `t` for aggregates.
    pub index: i64,
    pub count: u64,
    pub bound: f64,
    pub margin: f64,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Smallest `t` from which every tested level passed.
    pub t0: Option<u32>,
}

impl SweepReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.status == Status::Pass)
    }

    /// CSV `kind,index,count,bound,margin,status`.
    pub fn csv(&self) -> String {
        let mut s = String::from("kind,index,count,bound,margin,status\n");
        for r in &self.rows {
            let st = match r.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
            };
            s.push_str(&format!("{},{},{},{:.17e},{:.17e},{}\n", r.kind, r.index, r.count, r.bound, r.margin, st));
        }
        s
    }
}

/// Single-ball checks use a frozen constant `c` for the second term.
#[derive(Clone, Debug)]
pub struct SingleCheck {
    pub config: CountConfig,
    pub omega: f64,
    pub c: f64,
}

/// Runs every single-ball configuration and every aggregate level, recording
/// count, bound and margin. Violations are recorded, never raised.
pub fn verify_counting_sweep(
    single: &[SingleCheck],
    aggregate: &[AggregateConfig],
    precision: Precision,
    budget: u128,
) -> Result<SweepReport> {
    let mut rows = Vec::new();
    for l in single {
        let cfg = &l.config;
        let count = count_exact(cfg, precision, budget)?;
        let bound = if cfg.single_point_regime() {
            1.0
        } else {
            lemma3_bound(cfg.q, &cfg.delta, &cfg.ball.measure(), l.omega, l.c, cfg.subspace.d(), cfg.subspace.n())?.lo_f64()
        };
        let pass = if cfg.single_point_regime() {
            count <= 1
        } else {
            (count as f64) < bound
        };
        rows.push(SweepRow {
            kind: "single".into(),
            index: cfg.q,
            count,
            bound,
            margin: bound - count as f64,
            status: if pass { Status::Pass } else { Status::Fail },
        });
    }
    let mut levels: Vec<(u32, bool)> = Vec::new();
    for a in aggregate {
        let count = count_aggregate(a, precision, budget)?;
        let bound = theorem4_bound(a.k, a.t, &a.psi, &a.ball.measure(), a.subspace.d(), a.subspace.n()).lo_f64();
        let pass = (count as f64) < bound;
        levels.push((a.t, pass));
        rows.push(SweepRow {
            kind: "aggregate".into(),
            index: a.t as i64,
            count,
            bound,
            margin: bound - count as f64,
            status: if pass { Status::Pass } else { Status::Fail },
        });
    }
    levels.sort();
    let mut t0 = None;
    for &(t, pass) in levels.iter().rev() {
        if !pass {
            break;
        }
        t0 = Some(t);
    }
    Ok(SweepReport { rows, t0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactReal;

    fn r(p: i64, q: i64) -> Rational {
        Rational::from((p, q))
    }

    fn line() -> AffineSubspaceSpec {
        AffineSubspaceSpec::line(ExactReal::sqrt(2), ExactReal::zero())
    }

    fn cfg(q: i64, delta: Rational, x0: Rational, eta: Rational) -> CountConfig {
        CountConfig {
            subspace: line(),
            q,
            delta,
            ball: Ball::new(vec![ExactReal::from_rational(&x0)], eta).unwrap(),
        }
    }

    #[test]
    fn count_examples() {
        let p = Precision::default();
        assert_eq!(count_exact(&cfg(5, r(1, 5), r(1, 2), r(1, 2)), p, 1 << 30).unwrap(), 1);
        assert!(count_exact(&cfg(4, r(1, 5), r(1, 2), r(1, 10)), p, 1 << 30).unwrap() <= 1);
        // delta >= 1/2 counts the whole box 1..=q-1.
        assert_eq!(count_exact(&cfg(9, r(1, 2) + r(1, 100), r(1, 2), r(1, 2)), p, 1 << 30).unwrap(), 8);
    }

    #[test]
    fn single_bound_example() {
        let b = lemma3_bound(100, &r(1, 5), &r(1, 1), 1.05, 1.0, 2, 1).unwrap();
        let expect = 180.0 + 0.2f64.powf(-0.05) * 4f64.ln();
        assert!((b.mid_f64() - expect).abs() < 1e-9);
        assert!((b.mid_f64() - 181.503).abs() < 1e-3);
        assert!(lemma3_bound(100, &r(1, 2), &r(1, 1), 1.05, 1.0, 2, 1).is_err());
        let z = lemma3_bound(100, &r(1, 5), &r(0, 1), 1.05, 0.0, 2, 1).unwrap();
        assert_eq!(z.hi_f64(), 0.0);
    }

    #[test]
    fn aggregate_bound_example() {
        let psi = ApproxFunction::power(r(1, 2)).unwrap();
        let b = theorem4_bound(45, 2, &psi, &r(1, 1), 2, 1);
        assert!(b.contains_rational(&Rational::from(10935)));
        assert_eq!(theorem4_bound(45, 2, &psi, &r(0, 1), 2, 1).hi_f64(), 0.0);
        let b3 = theorem4_bound(45, 3, &psi, &r(1, 1), 2, 1);
        let ratio = b3.mid_f64() / b.mid_f64();
        assert!((ratio - 45f64.powf(-0.5) * 45f64.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn aggregate_smallest_level() {
        let psi = ApproxFunction::constant(r(1, 1)).unwrap();
        let a = AggregateConfig {
            subspace: line(),
            psi,
            k: 45,
            t: 1,
            ball: Ball::unit(1),
        };
        // q = 1 and the open unit ball leave no positive p.
        assert_eq!(count_aggregate(&a, Precision::default(), 1 << 30).unwrap(), 0);
    }

    #[test]
    fn aggregate_matches_brute_force() {
        let psi = ApproxFunction::power(r(1, 2)).unwrap();
        let a = AggregateConfig {
            subspace: line(),
            psi: psi.clone(),
            k: 45,
            t: 2,
            ball: Ball::unit(1),
        };
        let got = count_aggregate(&a, Precision::default(), 1 << 30).unwrap();
        // psi(45^2)/2 = 1/90; count 1 <= p < q <= 45 with ||p sqrt 2|| < 1/90.
        let mut want = 0;
        for q in 1..=45i64 {
            for p in 1..q {
                let v = (p as f64) * 2f64.sqrt();
                if (v - v.round()).abs() < 1.0 / 90.0 {
                    want += 1;
                }
            }
        }
        assert_eq!(got, want);
        assert!((got as f64) < theorem4_bound(45, 2, &psi, &r(1, 1), 2, 1).lo_f64());
    }

    #[test]
    fn sweep_flags_tiny_constant() {
        let checks = vec![SingleCheck {
            config: cfg(2000, r(1, 100), r(1, 2), r(1, 2)),
            omega: 1.05,
            c: 1e-12,
        }];
        let rep = verify_counting_sweep(&checks, &[], Precision::default(), 1 << 30).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!(verify_counting_sweep(&[], &[], Precision::default(), 1).unwrap().rows.is_empty());
    }
}
