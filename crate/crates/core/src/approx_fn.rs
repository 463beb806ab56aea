//! Approximation functions `psi` and certified thresholds derived from them.

use std::fmt;
use std::sync::Arc;

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::fastball::Bounds;
use crate::interval::Interval;

/// A decreasing positive function on the positive integers.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "PsiText", into = "PsiText")]
pub enum ApproxFunction {
    /// `c * q^(-tau) * log(q+1)^(-sigma)`.
    PowerLog {
        c: Rational,
        tau: Rational,
        sigma: Rational,
    },
    /// Right-constant step function through `(q_i, v_i)`, `q_0 = 1`.
    Table { points: Vec<(u64, Rational)> },
}

impl ApproxFunction {
    pub fn power_log(c: Rational, tau: Rational, sigma: Rational) -> Result<Self> {
        if c <= 0 {
            return Err(Error::invalid("psi: constant must be positive"));
        }
        if tau < 0 || sigma < 0 {
            return Err(Error::invalid("psi: exponents must be non-negative"));
        }
        Ok(ApproxFunction::PowerLog { c, tau, sigma })
    }

    /// `q^(-tau)`.
    pub fn power(tau: Rational) -> Result<Self> {
        Self::power_log(Rational::from(1), tau, Rational::new())
    }

    pub fn constant(c: Rational) -> Result<Self> {
        Self::power_log(c, Rational::new(), Rational::new())
    }

    pub fn table(points: Vec<(u64, Rational)>) -> Result<Self> {
        match points.first() {
            Some((1, _)) => {}
            _ => return Err(Error::invalid("psi table must start at q = 1")),
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("psi table abscissae must increase"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid("psi table values must be non-increasing"));
            }
        }
        if points.iter().any(|(_, v)| *v <= 0) {
            return Err(Error::invalid("psi table values must be positive"));
        }
        Ok(ApproxFunction::Table { points })
    }

    pub fn is_power_log(&self) -> bool {
        matches!(self, ApproxFunction::PowerLog { .. })
    }

    /// Certified enclosure of `psi(q)` at working precision `prec`.
    pub fn eval(&self, q: &Integer, prec: u32) -> Interval {
        assert!(*q >= 1, "psi is defined on q >= 1");
        if let Some(x) = self.exact_value(q) {
            return x.enclose(prec);
        }
        match self {
            ApproxFunction::PowerLog { c, tau, sigma } => {
                let mut v = Interval::from_rational(c, prec);
                if *tau != 0 {
                    let lnq = Interval::from_integer(q, prec).ln();
                    let e = Interval::from_rational(tau, prec).neg();
                    v = v.mul(&lnq.mul(&e).exp());
                }
                if *sigma != 0 {
                    let q1 = Integer::from(q + 1u32);
                    let l = Interval::from_integer(&q1, prec).ln();
                    v = v.mul(&l.pow(&Interval::from_rational(sigma, prec).neg()));
                }
                v
            }
            ApproxFunction::Table { .. } => unreachable!("tables are exact"),
        }
    }

    pub fn eval_u64(&self, q: u64, prec: u32) -> Interval {
        self.eval(&Integer::from(q), prec)
    }

    /// Exact value when it is a quadratic surd: tables, constants, and
    /// `c * q^(-m/2)` with no log factor.
    pub fn exact_value(&self, q: &Integer) -> Option<ExactReal> {
        match self {
            ApproxFunction::Table { points } => {
                let idx = match points.binary_search_by(|(k, _)| Integer::from(*k).cmp(q)) {
                    Ok(i) => i,
                    Err(i) => i - 1,
                };
                Some(ExactReal::from_rational(&points[idx].1))
            }
            ApproxFunction::PowerLog { c, tau, sigma } => {
                if *sigma != 0 {
                    return None;
                }
                let twice = Rational::from(tau * 2u32);
                if *twice.denom() != 1 {
                    return None;
                }
                let m = twice.numer().to_u32()?;
                let cq = ExactReal::from_rational(c);
                let half = m / 2;
                let qpow = Integer::from(q.pow(half));
                let base = cq.mul_rational(&Rational::from((Integer::from(1), qpow)));
                if m % 2 == 0 {
                    Some(base)
                } else {
                    // q^(-1/2) = sqrt(q)/q
                    let qq = q.to_u64()?;
                    Some(
                        base.mul(&ExactReal::sqrt(qq))
                            .mul_rational(&Rational::from((Integer::from(1), q.clone()))),
                    )
                }
            }
        }
    }

    /// Certified threshold `scale * psi(q)`.
    pub fn threshold(&self, q: u64, scale: &Rational) -> Threshold {
        let qi = Integer::from(q);
        if let Some(x) = self.exact_value(&qi) {
            return Threshold::exact(x.mul_rational(scale));
        }
        let psi = self.clone();
        let scale = scale.clone();
        Threshold::from_fn(move |prec| psi.eval(&qi, prec).mul_rational(&scale))
    }
}

impl fmt::Display for ApproxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproxFunction::PowerLog { c, tau, sigma } => {
                write!(f, "{}*q^(-{})*log(q+1)^(-{})", c, tau, sigma)
            }
            ApproxFunction::Table { points } => write!(f, "table[{} points]", points.len()),
        }
    }
}

/// Text form used in config files; rationals are written as strings.
#[derive(Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PsiText {
    PowerLog {
        #[serde(default = "one_text")]
        c: String,
        tau: String,
        #[serde(default = "zero_text")]
        sigma: String,
    },
    Table { points: Vec<(u64, String)> },
}

fn one_text() -> String {
    "1".into()
}

fn zero_text() -> String {
    "0".into()
}

impl TryFrom<PsiText> for ApproxFunction {
    type Error = Error;

    fn try_from(t: PsiText) -> Result<Self> {
        let lit = crate::exact::parse_rational_literal;
        match t {
            PsiText::PowerLog { c, tau, sigma } => Self::power_log(lit(&c)?, lit(&tau)?, lit(&sigma)?),
            PsiText::Table { points } => {
                let pts = points
                    .into_iter()
                    .map(|(q, v)| Ok((q, lit(&v)?)))
                    .collect::<Result<Vec<_>>>()?;
                Self::table(pts)
            }
        }
    }
}

impl From<ApproxFunction> for PsiText {
    fn from(f: ApproxFunction) -> Self {
        match f {
            ApproxFunction::PowerLog { c, tau, sigma } => PsiText::PowerLog {
                c: c.to_string(),
                tau: tau.to_string(),
                sigma: sigma.to_string(),
            },
            ApproxFunction::Table { points } => PsiText::Table {
                points: points.into_iter().map(|(q, v)| (q, v.to_string())).collect(),
            },
        }
    }
}

type EvalFn = dyn Fn(u32) -> Interval + Send + Sync;

/// A positive real used as a strict comparison threshold. Exact when
/// possible, otherwise re-evaluable at any precision.
#[derive(Clone)]
pub struct Threshold {
    exact: Option<ExactReal>,
    eval: Option<Arc<EvalFn>>,
    bounds: Bounds,
}

impl fmt::Debug for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(x) => write!(f, "Threshold({})", x),
            None => write!(f, "Threshold[{:e}, {:e}]", self.bounds.lo, self.bounds.hi),
        }
    }
}

impl Threshold {
    pub fn exact(x: ExactReal) -> Self {
        let bounds = Bounds::from_interval(&x.enclose(128));
        Threshold {
            exact: Some(x),
            eval: None,
            bounds,
        }
    }

    pub fn rational(r: &Rational) -> Self {
        Self::exact(ExactReal::from_rational(r))
    }

    pub fn from_fn(f: impl Fn(u32) -> Interval + Send + Sync + 'static) -> Self {
        let bounds = Bounds::from_interval(&f(128));
        Threshold {
            exact: None,
            eval: Some(Arc::new(f)),
            bounds,
        }
    }

    pub fn exact_value(&self) -> Option<&ExactReal> {
        self.exact.as_ref()
    }

    pub fn enclose(&self, prec: u32) -> Interval {
        match (&self.exact, &self.eval) {
            (Some(x), _) => x.enclose(prec),
            (None, Some(f)) => f(prec),
            (None, None) => unreachable!("threshold without a value"),
        }
    }

    /// `f64` bounds at 128 bits, for the fast kernels.
    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn to_f64(&self) -> f64 {
        0.5 * (self.bounds.lo + self.bounds.hi)
    }
}
