//! Systems of linear forms, a lattice-reduction solver for Minkowski's
//! theorem, and covering witnesses built from the containment system.

use std::cmp::Ordering;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::approx_fn::{ApproxFunction, Threshold};
use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::interval::Interval;
use crate::precision::Precision;
use crate::subspace::{AffineSubspaceSpec, ClosenessKernel, HattedVector};

/// `|<row_i, x>| < C_i` for `i < k` and `|<row_k, x>| <= C_k`.
#[derive(Clone, Debug)]
pub struct LinearFormsSystem {
    pub beta: Vec<Vec<ExactReal>>,
    pub bounds: Vec<Threshold>,
}

/// Certified `|v| < c` (or `<=` when `strict` is false).
pub fn abs_below(v: &ExactReal, c: &Threshold, strict: bool, precision: Precision) -> Result<bool> {
    let a = v.abs();
    if let Some(e) = c.exact_value() {
        let o = a.cmp_exact(e);
        return Ok(o == Ordering::Less || (!strict && o == Ordering::Equal));
    }
    for b in precision.ladder() {
        let lhs = a.eval_bits(b);
        let rhs = c.enclose(b + 16);
        let r = if strict { lhs.lt(&rhs) } else { lhs.le(&rhs) };
        if let Some(r) = r {
            return Ok(r);
        }
    }
    Err(Error::precision("linear form comparison", precision.max_bits))
}

/// Exact determinant by Laplace expansion along the first row.
pub fn determinant(m: &[Vec<ExactReal>]) -> ExactReal {
    let k = m.len();
    if k == 1 {
        return m[0][0].clone();
    }
    let mut acc = ExactReal::zero();
    for c in 0..k {
        if m[0][c].is_zero() {
            continue;
        }
        let minor: Vec<Vec<ExactReal>> = m[1..]
            .iter()
            .map(|r| r.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| x.clone()).collect())
            .collect();
        let term = m[0][c].mul(&determinant(&minor));
        acc = if c % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

impl LinearFormsSystem {
    pub fn new(beta: Vec<Vec<ExactReal>>, bounds: Vec<Threshold>) -> Result<Self> {
        let k = beta.len();
        if k == 0 || beta.iter().any(|r| r.len() != k) || bounds.len() != k {
            return Err(Error::invalid("linear forms system must be k x k with k bounds"));
        }
        if bounds.iter().any(|b| b.bounds().hi <= 0.0) {
            return Err(Error::invalid("bounds must be positive"));
        }
        Ok(LinearFormsSystem { beta, bounds })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn determinant(&self) -> ExactReal {
        determinant(&self.beta)
    }

    /// Certified enclosure of `prod C_i`.
    pub fn bound_product(&self, prec: u32) -> Interval {
        self.bounds
            .iter()
            .fold(Interval::from_i64(1, prec), |acc, b| acc.mul(&b.enclose(prec)))
    }

    /// Certified `|det beta| <= prod C_i`.
    pub fn minkowski_condition(&self, precision: Precision) -> Result<bool> {
        let det = self.determinant().abs();
        for b in precision.ladder() {
            if let Some(r) = det.eval_bits(b).le(&self.bound_product(b + 16)) {
                return Ok(r);
            }
        }
        // Equality cannot be separated by intervals; fall back to exact bounds.
        let mut prod = ExactReal::one();
        for c in &self.bounds {
            match c.exact_value() {
                Some(e) => prod = prod.mul(e),
                None => return Err(Error::precision("determinant condition", precision.max_bits)),
            }
        }
        Ok(det.cmp_exact(&prod) != Ordering::Greater)
    }

    /// `<row_i, x>` exactly.
    pub fn form(&self, i: usize, x: &[i64]) -> ExactReal {
        let mut acc = ExactReal::zero();
        for (b, &xi) in self.beta[i].iter().zip(x) {
            if xi != 0 {
                acc = acc.add(&b.mul_i64(xi));
            }
        }
        acc
    }

    /// Certified check of all `k` inequalities.
    pub fn satisfied_by(&self, x: &[i64], precision: Precision) -> Result<bool> {
        let k = self.dim();
        for i in 0..k {
            if !abs_below(&self.form(i, x), &self.bounds[i], i + 1 < k, precision)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Options for [`solve_linear_forms`].
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Reject solutions whose last coordinate is zero, and make it positive.
    pub last_positive: bool,
    /// Cap on enumeration nodes.
    pub budget: u64,
    pub precision: Precision,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            last_positive: false,
            budget: 1_000_000,
            precision: Precision::default(),
        }
    }
}

/// LLL on the columns of `b` (each of length `k`), tracking the unimodular transform.
fn lll(b: &mut [Vec<f64>], u: &mut [Vec<i64>]) {
    let k = b.len();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let gso = |b: &[Vec<f64>]| {
        let mut bs: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut mu = vec![vec![0.0; k]; k];
        let mut nrm = vec![0.0; k];
        for i in 0..k {
            let mut v = b[i].clone();
            for j in 0..i {
                mu[i][j] = dot(&b[i], &bs[j]) / nrm[j];
                for (a, c) in v.iter_mut().zip(&bs[j]) {
                    *a -= mu[i][j] * c;
                }
            }
            nrm[i] = dot(&v, &v);
            bs.push(v);
        }
        (mu, nrm)
    };
    let mut i = 1;
    let mut guard = 0;
    while i < k && guard < 10_000 {
        guard += 1;
        let (mu, _) = gso(b);
        for j in (0..i).rev() {
            let r = mu[i][j].round();
            if r != 0.0 {
                let (bj, uj) = (b[j].clone(), u[j].clone());
                for (a, c) in b[i].iter_mut().zip(&bj) {
                    *a -= r * c;
                }
                for (a, c) in u[i].iter_mut().zip(&uj) {
                    *a -= r as i64 * c;
                }
            }
        }
        let (mu, nrm) = gso(b);
        if nrm[i] >= (0.99 - mu[i][i - 1] * mu[i][i - 1]) * nrm[i - 1] {
            i += 1;
        } else {
            b.swap(i, i - 1);
            u.swap(i, i - 1);
            i = (i - 1).max(1);
        }
    }
}

/// Search for a nonzero integer solution, certifying every candidate exactly.
///
/// Exhausting the budget yields `SolverIncomplete`, which says nothing about existence.
pub fn solve_linear_forms(sys: &LinearFormsSystem, opts: SolveOptions) -> Result<Vec<i64>> {
    let k = sys.dim();
    let scale: Vec<f64> = sys.bounds.iter().map(|b| b.to_f64()).collect();
    let entry: Vec<Vec<f64>> = sys.beta.iter().map(|r| r.iter().map(|x| x.to_f64()).collect()).collect();
    // Column j of the scaled matrix is the image of e_j.
    let mut b: Vec<Vec<f64>> = (0..k).map(|j| (0..k).map(|i| entry[i][j] / scale[i]).collect()).collect();
    let mut u: Vec<Vec<i64>> = (0..k).map(|j| (0..k).map(|i| (i == j) as i64).collect()).collect();
    lll(&mut b, &mut u);

    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut bs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut mu = vec![vec![0.0; k]; k];
    let mut nrm = vec![0.0; k];
    for i in 0..k {
        let mut v = b[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&b[i], &bs[j]) / nrm[j];
            for (a, c) in v.iter_mut().zip(&bs[j]) {
                *a -= mu[i][j] * c;
            }
        }
        nrm[i] = dot(&v, &v);
        bs.push(v);
    }

    let mut nodes = 0u64;
    let mut radius2 = k as f64 * (1.0 + 1e-9) + 1e-9;
    loop {
        let mut z = vec![0i64; k];
        let mut found = None;
        enumerate(k, &mu, &nrm, radius2, &mut z, 0.0, &mut nodes, opts.budget, &mut |z| {
            if z.iter().all(|&v| v == 0) {
                return Ok(false);
            }
            let mut x = vec![0i128; k];
            for (j, &zj) in z.iter().enumerate() {
                for i in 0..k {
                    x[i] += u[j][i] as i128 * zj as i128;
                }
            }
            if x.iter().any(|v| v.unsigned_abs() > (1u128 << 62)) {
                return Ok(false);
            }
            let mut x: Vec<i64> = x.into_iter().map(|v| v as i64).collect();
            if opts.last_positive {
                if x[k - 1] == 0 {
                    return Ok(false);
                }
                if x[k - 1] < 0 {
                    x.iter_mut().for_each(|v| *v = -*v);
                }
            }
            if sys.satisfied_by(&x, opts.precision)? {
                found = Some(x);
                return Ok(true);
            }
            Ok(false)
        })?;
        if let Some(x) = found {
            return Ok(x);
        }
        if nodes >= opts.budget {
            return Err(Error::SolverIncomplete(format!("no certified solution within {nodes} enumeration nodes")));
        }
        radius2 *= 4.0;
    }
}

/// Fincke-Pohst enumeration of `z` with `|sum z_j b_j|^2 <= r2`, last index first.
#[allow(clippy::too_many_arguments)]
fn enumerate(
    level: usize,
    mu: &[Vec<f64>],
    nrm: &[f64],
    r2: f64,
    z: &mut Vec<i64>,
    partial: f64,
    nodes: &mut u64,
    budget: u64,
    visit: &mut dyn FnMut(&[i64]) -> Result<bool>,
) -> Result<bool> {
    if level == 0 {
        return visit(z);
    }
    let i = level - 1;
    let k = z.len();
    let c: f64 = -(i + 1..k).map(|j| mu[j][i] * z[j] as f64).sum::<f64>();
    let rem = r2 - partial;
    if rem < 0.0 {
        return Ok(false);
    }
    let w = (rem / nrm[i]).sqrt();
    let lo = (c - w).ceil() as i64;
    let hi = (c + w).floor() as i64;
    // Visit values in order of distance from the centre for early hits.
    let mut vals: Vec<i64> = (lo..=hi).collect();
    vals.sort_by(|a, b| ((*a as f64 - c).abs()).total_cmp(&(*b as f64 - c).abs()).then(a.cmp(b)));
    for v in vals {
        *nodes += 1;
        if *nodes > budget {
            return Ok(false);
        }
        z[i] = v;
        let d = v as f64 - c;
        if enumerate(i, mu, nrm, r2, z, partial + d * d * nrm[i], nodes, budget, visit)? {
            return Ok(true);
        }
    }
    z[i] = 0;
    Ok(false)
}

/// `psi(N)/2`, `2^((d-n)/n) / (N^(1/n) psi(N)^((d-n)/n))` and `N`.
pub fn containment_bounds(n_big: u64, psi: &ApproxFunction, d: usize, n: usize) -> (Threshold, Threshold, Threshold) {
    let close = psi.threshold(n_big, &Rational::from((1, 2)));
    let m = (d - n) as i64;
    let nn = Integer::from(n_big);
    let exact_mid = if n == 1 {
        psi.exact_value(&nn).and_then(|v| {
            // 2^m / (N v^m) with v = psi(N); exact when v^m inverts to a surd.
            let vm = (0..m).fold(ExactReal::one(), |acc, _| acc.mul(&v));
            invert_surd(&vm).map(|inv| inv.mul_rational(&Rational::from((Integer::from(1) << m as u32, nn.clone()))))
        })
    } else {
        None
    };
    let mid = match exact_mid {
        Some(e) => Threshold::exact(e),
        None => {
            let psi = psi.clone();
            Threshold::from_fn(move |prec| {
                let e = Interval::from_rational(&Rational::from((m, n as i64)), prec);
                let two = Interval::from_i64(2, prec).pow(&e);
                let nroot = Interval::from_integer(&nn, prec).pow(&Interval::from_rational(&Rational::from((1, n as i64)), prec));
                two.div(&nroot.mul(&psi.eval(&nn, prec).pow(&e)))
            })
        }
    };
    let height = Threshold::exact(ExactReal::from_integer(Integer::from(n_big)));
    (close, mid, height)
}

/// `1/x` for `x = (a + b sqrt D)/r` or rational `x`.
fn invert_surd(x: &ExactReal) -> Option<ExactReal> {
    if let Some(r) = x.as_rational() {
        return Some(ExactReal::from_rational(&r.recip()));
    }
    let (a, b, d, r) = x.as_quadratic()?;
    // r / (a + b sqrt D) = r (a - b sqrt D) / (a^2 - b^2 D)
    let den = Integer::from(&a * &a) - Integer::from(&b * &b) * d;
    let conj = ExactReal::quadratic(a, -b, d, Integer::from(1)).ok()?;
    Some(conj.mul_rational(&Rational::from((r, den))))
}

/// The `(d+1) x (d+1)` system whose solutions `(r, p, q)` give `p^ = (q, p)`
/// close to the subspace with `p/q` close to `x`.
pub fn build_containment_system(x: &[ExactReal], n_big: u64, psi: &ApproxFunction, spec: &AffineSubspaceSpec) -> Result<LinearFormsSystem> {
    let (n, d) = (spec.n(), spec.d());
    let m = d - n;
    if x.len() != n || n_big < 1 {
        return Err(Error::invalid("containment system needs x in [0,1]^n and N >= 1"));
    }
    let k = d + 1;
    let zero = ExactReal::zero();
    let minus = ExactReal::from_i64(-1);
    let mut beta = vec![vec![zero.clone(); k]; k];
    for i in 0..m {
        beta[i][i] = minus.clone();
        for j in 0..n {
            beta[i][m + j] = spec.tilt()[j][i].clone();
        }
        beta[i][k - 1] = spec.shift()[i].clone();
    }
    for j in 0..n {
        beta[m + j][m + j] = minus.clone();
        beta[m + j][k - 1] = x[j].clone();
    }
    beta[k - 1][k - 1] = ExactReal::one();
    let (c1, c2, c3) = containment_bounds(n_big, psi, d, n);
    let mut bounds = vec![c1; m];
    bounds.extend(std::iter::repeat(c2).take(n));
    bounds.push(c3);
    LinearFormsSystem::new(beta, bounds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringWitness {
    pub p_hat: HattedVector,
    pub r: Vec<i64>,
    /// `|x - p/q| < C / q` with the proof's per-form bound `C`.
    pub radius_ok: bool,
    /// `||p^ a~|| < psi(N)/2`.
    pub closeness_ok: bool,
    /// `1 <= q <= N`.
    pub height_ok: bool,
    /// `|x - p/q| < C / N`, the radius of the statement.
    pub statement_radius_ok: bool,
    /// `max_j |x_j - p_j/q|`, for reporting.
    pub distance: f64,
    /// `C / q`.
    pub proof_radius: f64,
    /// `C / N`.
    pub statement_radius: f64,
}

impl CoveringWitness {
    pub fn valid(&self) -> bool {
        self.radius_ok && self.closeness_ok && self.height_ok
    }
}

/// Solve the containment system at `x` and certify the three inequalities.
pub fn covering_witness(
    x: &[ExactReal],
    n_big: u64,
    psi: &ApproxFunction,
    spec: &AffineSubspaceSpec,
    budget: u64,
    precision: Precision,
) -> Result<CoveringWitness> {
    let sys = build_containment_system(x, n_big, psi, spec)?;
    let sol = solve_linear_forms(
        &sys,
        SolveOptions {
            last_positive: true,
            budget,
            precision,
        },
    )?;
    let (n, m) = (spec.n(), spec.codim());
    let k = sol.len();
    let q = sol[k - 1];
    let r = sol[..m].to_vec();
    let p = sol[m..m + n].to_vec();
    let p_hat = HattedVector { q, p: p.clone() };
    let mid = sys.bounds[m].clone();

    let kernel = ClosenessKernel::new(spec, precision);
    let closeness_ok = kernel.is_close(q, &p, &sys.bounds[0])?;
    let height_ok = q >= 1 && (q as u64) <= n_big;
    let mut radius_ok = true;
    let mut statement_ok = true;
    let mut distance = 0.0f64;
    let nq = ExactReal::from_i64(n_big as i64);
    for j in 0..n {
        let dev = x[j].mul_i64(q).sub(&ExactReal::from_i64(p[j]));
        radius_ok &= abs_below(&dev, &mid, true, precision)?;
        // |x - p/q| < C/N  <=>  |q x - p| N < C q
        let lhs = dev.mul(&nq);
        let scaled = scale_threshold(&mid, q);
        statement_ok &= abs_below(&lhs, &scaled, true, precision)?;
        distance = distance.max(dev.to_f64().abs() / q as f64);
    }
    Ok(CoveringWitness {
        p_hat,
        r,
        radius_ok,
        closeness_ok,
        height_ok,
        statement_radius_ok: statement_ok,
        distance,
        proof_radius: mid.to_f64() / q as f64,
        statement_radius: mid.to_f64() / n_big as f64,
    })
}

pub(crate) fn scale_threshold(t: &Threshold, q: i64) -> Threshold {
    match t.exact_value() {
        Some(e) => Threshold::exact(e.mul_i64(q)),
        None => {
            let t = t.clone();
            Threshold::from_fn(move |prec| t.enclose(prec).mul_i64(q))
        }
    }
}
