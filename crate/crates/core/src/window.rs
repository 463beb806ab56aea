//! Candidate search for `||q a0 + p a|| < delta` over many `(q, p)`.
//!
//! Fractional parts of `p * beta` for the last coordinate of `p` are sorted
//! once; for each outer vector the admissible `p` form a window of that sorted
//! list. Windows are widened by every rounding error involved, so the list of
//! candidates is a superset of the true solutions, and each candidate is then
//! certified by [`ClosenessKernel::is_close`].

use crate::approx_fn::Threshold;
use crate::error::{Error, Result};
use crate::fastball::FastBall;
use crate::subspace::{AffineSubspaceSpec, ClosenessKernel};
use crate::precision::Precision;

/// Cap on membership tests, shared by one enumeration.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub used: u128,
    pub cap: u128,
}

impl Budget {
    pub fn new(cap: u128) -> Self {
        Budget { used: 0, cap }
    }

    pub fn unlimited() -> Self {
        Budget::new(u128::MAX)
    }

    pub fn charge(&mut self, n: u128, context: &str) -> Result<()> {
        self.used = self.used.saturating_add(n);
        if self.used > self.cap {
            return Err(Error::BudgetExceeded {
                needed: self.used,
                budget: self.cap,
                context: context.to_string(),
            });
        }
        Ok(())
    }
}

/// Sorted fractional parts of `p * beta` for `p` in `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct WindowIndex {
    lo: i64,
    hi: i64,
    fracs: Vec<f64>,
    ps: Vec<i64>,
    err: f64,
}

impl WindowIndex {
    pub fn new(beta: FastBall, lo: i64, hi: i64) -> Self {
        let mut pairs: Vec<(f64, i64)> = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        let mut err = 0.0f64;
        for p in lo..=hi {
            let b = beta.mul_int(p);
            let f = b.mid - b.mid.floor();
            err = err.max(b.rad);
            pairs.push((f, p));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // Subtracting the floor is exact below 2^52; the rest is ball radius
        // plus one ulp of the magnitude for safety.
        let top = beta.mid.abs() * (lo.unsigned_abs().max(hi.unsigned_abs()) as f64);
        err += top * f64::EPSILON + 1e-300;
        let (fracs, ps) = pairs.into_iter().unzip();
        WindowIndex { lo, hi, fracs, ps, err }
    }

    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    /// Every `p` in `[plo, phi]` that might satisfy `||t + p beta|| < delta_hi`.
    pub fn candidates(&self, t: FastBall, delta_hi: f64, plo: i64, phi: i64, out: &mut Vec<i64>) {
        out.clear();
        let plo = plo.max(self.lo);
        let phi = phi.min(self.hi);
        if plo > phi {
            return;
        }
        let w = delta_hi + self.err + t.rad + 4.0 * f64::EPSILON * (1.0 + t.mid.abs());
        if w >= 0.5 {
            out.extend(plo..=phi);
            return;
        }
        let neg = -t.mid;
        let c = neg - neg.floor();
        let mut push_range = |a: f64, b: f64| {
            let i = self.fracs.partition_point(|&f| f < a);
            let j = self.fracs.partition_point(|&f| f <= b);
            for k in i..j {
                let p = self.ps[k];
                if p >= plo && p <= phi {
                    out.push(p);
                }
            }
        };
        let (a, b) = (c - w, c + w);
        if a < 0.0 {
            push_range(a + 1.0, 1.0);
            push_range(0.0, b);
        } else if b > 1.0 {
            push_range(a, 1.0);
            push_range(0.0, b - 1.0);
        } else {
            push_range(a, b);
        }
        out.sort_unstable();
        out.dedup();
    }
}

/// Enumerates integer vectors `p` in a box with `||p^ a~|| < thr` for given `q`.
pub struct CloseEnumerator {
    kernel: ClosenessKernel,
    balls: Vec<FastBall>,
    index: Option<WindowIndex>,
}

impl CloseEnumerator {
    /// `p_max` bounds the last coordinate of every box that will be queried.
    pub fn new(spec: &AffineSubspaceSpec, precision: Precision, p_min: i64, p_max: i64) -> Self {
        let kernel = ClosenessKernel::new(spec, precision);
        let aug = kernel.augmented();
        let balls: Vec<FastBall> = aug
            .iter()
            .map(|row| FastBall::from_interval(&row[0].eval_bits(110)))
            .collect();
        let n = spec.n();
        let index = if p_max - p_min > 64 {
            Some(WindowIndex::new(balls[n], p_min, p_max))
        } else {
            None
        };
        CloseEnumerator { kernel, balls, index }
    }

    pub fn kernel(&self) -> &ClosenessKernel {
        &self.kernel
    }

    /// Calls `visit(p)` for every certified solution in the product of
    /// inclusive `ranges`, in lexicographic order.
    pub fn for_each(
        &self,
        q: i64,
        ranges: &[(i64, i64)],
        thr: &Threshold,
        budget: &mut Budget,
        mut visit: impl FnMut(&[i64]),
    ) -> Result<()> {
        let n = ranges.len();
        if ranges.iter().any(|&(a, b)| a > b) {
            return Ok(());
        }
        let tb = thr.bounds();
        let mut p: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut cands = Vec::new();
        loop {
            let (lo, hi) = ranges[n - 1];
            let use_index = match &self.index {
                Some(ix) => {
                    let (a, b) = ix.range();
                    a <= lo && hi <= b && hi - lo > 64
                }
                None => false,
            };
            if use_index {
                let mut t = self.balls[0].mul_int(q);
                for i in 0..n - 1 {
                    t = t.add(self.balls[i + 1].mul_int(p[i]));
                }
                self.index.as_ref().unwrap().candidates(t, tb.hi, lo, hi, &mut cands);
            } else {
                cands.clear();
                cands.extend(lo..=hi);
            }
            budget.charge(cands.len() as u128 + 1, "close-point enumeration")?;
            for &c in &cands {
                p[n - 1] = c;
                if self.kernel.is_close(q, &p, thr)? {
                    visit(&p);
                }
            }
            // Advance the outer coordinates.
            let mut i = n - 1;
            loop {
                if i == 0 {
                    return Ok(());
                }
                i -= 1;
                if p[i] < ranges[i].1 {
                    p[i] += 1;
                    for j in i + 1..n - 1 {
                        p[j] = ranges[j].0;
                    }
                    break;
                }
            }
        }
    }

    /// Number of certified solutions in the box.
    pub fn count(&self, q: i64, ranges: &[(i64, i64)], thr: &Threshold, budget: &mut Budget) -> Result<u64> {
        let mut c = 0u64;
        self.for_each(q, ranges, thr, budget, |_| c += 1)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactReal;
    use crate::norm::nearest_int_dist_exact;
    use proptest::prelude::*;
    use rug::Rational;
    use std::cmp::Ordering;

    fn brute(spec: &AffineSubspaceSpec, q: i64, lo: i64, hi: i64, delta: &ExactReal) -> Vec<i64> {
        let aug = spec.augmented();
        (lo..=hi)
            .filter(|&p| {
                (0..spec.codim()).all(|c| {
                    let v = aug[0][c].mul_i64(q).add(&aug[1][c].mul_i64(p));
                    nearest_int_dist_exact(&v).cmp_exact(delta) == Ordering::Less
                })
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn window_matches_brute_force(q in 1i64..3000, dn in 1i64..200, a in 2u64..30, s in -50i64..50) {
            let spec = AffineSubspaceSpec::line(ExactReal::sqrt(a), ExactReal::from_ratio(s, 7));
            let delta = ExactReal::from_ratio(dn, 1000);
            let thr = Threshold::exact(delta.clone());
            let e = CloseEnumerator::new(&spec, Precision::default(), 0, 3000);
            let mut got = Vec::new();
            e.for_each(q, &[(0, q)], &thr, &mut Budget::unlimited(), |p| got.push(p[0])).unwrap();
            prop_assert_eq!(got, brute(&spec, q, 0, q, &delta));
        }
    }

    #[test]
    fn two_dimensional_box() {
        let x = |s: &str| s.parse::<ExactReal>().unwrap();
        let spec = AffineSubspaceSpec::new(3, 2, vec![vec![ExactReal::sqrt(2)], vec![ExactReal::sqrt(3)]], vec![x("1/5")]).unwrap();
        let thr = Threshold::rational(&Rational::from((1, 20)));
        let e = CloseEnumerator::new(&spec, Precision::default(), 0, 400);
        let mut got = Vec::new();
        e.for_each(37, &[(3, 30), (0, 300)], &thr, &mut Budget::unlimited(), |p| got.push(p.to_vec())).unwrap();
        let aug = spec.augmented();
        let mut want = Vec::new();
        for p1 in 3..=30i64 {
            for p2 in 0..=300i64 {
                let v = aug[0][0].mul_i64(37).add(&aug[1][0].mul_i64(p1)).add(&aug[2][0].mul_i64(p2));
                if nearest_int_dist_exact(&v).cmp_rational(&Rational::from((1, 20))) == Ordering::Less {
                    want.push(vec![p1, p2]);
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn budget_is_enforced() {
        let spec = AffineSubspaceSpec::line(ExactReal::sqrt(2), ExactReal::zero());
        let thr = Threshold::rational(&Rational::from((1, 4)));
        let e = CloseEnumerator::new(&spec, Precision::default(), 0, 10);
        let r = e.count(10, &[(0, 10)], &thr, &mut Budget::new(5));
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }
}
