//! Experiment orchestration behind the `dioph-lab` binary.
//!
//! Every subcommand is a pure function from (config, seed, precision, budget)
//! to a set of named output files; [`ledger`] handles persistence and replay.

pub mod config;
pub mod ledger;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rug::Rational;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::approx::{self, DimensionConfig, SeriesClass};
use crate::approx_fn::{ApproxFunction, Threshold};
use crate::counting::{self, AggregateConfig, CountConfig, SingleCheck, Status};
use crate::error::{Error, Result};
use crate::lattice::{self, LinearFormsSystem, SolveOptions};
use crate::madsum;
use crate::precision::Precision;
use crate::sampler::Sampler;
use crate::selberg::{majorization_grid, Sign, TrigPolynomial};
use crate::subspace::Ball;
use crate::ubiquity::{self, CoverConfig};
use crate::window::Budget;

use config::{rational, typed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    MadEstimate,
    MadSum,
    SelbergCheck,
    CountVerify,
    MinkowskiSolve,
    CoverCheck,
    UbiquityVerify,
    ApproxMeasure,
    Dimension,
    ClassifySeries,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::MadEstimate,
        Subcommand::MadSum,
        Subcommand::SelbergCheck,
        Subcommand::CountVerify,
        Subcommand::MinkowskiSolve,
        Subcommand::CoverCheck,
        Subcommand::UbiquityVerify,
        Subcommand::ApproxMeasure,
        Subcommand::Dimension,
        Subcommand::ClassifySeries,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::MadEstimate => "mad-estimate",
            Subcommand::MadSum => "mad-sum",
            Subcommand::SelbergCheck => "selberg-check",
            Subcommand::CountVerify => "count-verify",
            Subcommand::MinkowskiSolve => "minkowski-solve",
            Subcommand::CoverCheck => "cover-check",
            Subcommand::UbiquityVerify => "ubiquity-verify",
            Subcommand::ApproxMeasure => "approx-measure",
            Subcommand::Dimension => "dimension",
            Subcommand::ClassifySeries => "classify-series",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Settings shared by every subcommand.
#[derive(Clone, Copy, Debug)]
pub struct RunContext {
    pub seed: u64,
    pub precision: Precision,
    pub budget: u128,
}

/// Named output files plus the verdict.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: BTreeMap<String, Vec<u8>>,
    pub passed: bool,
    pub summary: String,
}

impl Outcome {
    fn file(&mut self, name: &str, body: impl Into<Vec<u8>>) {
        self.files.insert(name.to_string(), body.into());
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        self.file(name, s);
        Ok(())
    }
}

/// Runs one subcommand on a parsed config.
pub fn execute(sub: Subcommand, cfg: &toml::Value, ctx: &RunContext) -> Result<Outcome> {
    match sub {
        Subcommand::MadEstimate => mad_estimate(typed(cfg)?, ctx),
        Subcommand::MadSum => mad_sum(typed(cfg)?, ctx),
        Subcommand::SelbergCheck => selberg_check(typed(cfg)?, ctx),
        Subcommand::CountVerify => count_verify(typed(cfg)?, ctx),
        Subcommand::MinkowskiSolve => minkowski_solve(typed(cfg)?, ctx),
        Subcommand::CoverCheck => cover_check(typed(cfg)?, ctx),
        Subcommand::UbiquityVerify => ubiquity_verify(typed(cfg)?, ctx),
        Subcommand::ApproxMeasure => approx_measure(typed(cfg)?, ctx),
        Subcommand::Dimension => dimension(typed(cfg)?, ctx),
        Subcommand::ClassifySeries => classify_series(typed(cfg)?, ctx),
    }
}

fn checked_ball(ball: Option<Ball>, n: usize) -> Result<Ball> {
    match ball {
        None => Ok(Ball::unit(n)),
        Some(b) => {
            let b = Ball::new(b.center, b.radius).map_err(|e| Error::Config(format!("ball: {e}")))?;
            if b.dim() != n {
                return Err(Error::Config(format!("ball: dimension {} does not match n = {n}", b.dim())));
            }
            Ok(b)
        }
    }
}

fn u64_budget(ctx: &RunContext) -> u64 {
    ctx.budget.min(u64::MAX as u128) as u64
}

fn mad_estimate(c: config::MadEstimate, ctx: &RunContext) -> Result<Outcome> {
    let diag = madsum::estimate_exponent(&c.matrix, c.j_max)?;
    let mut out = Outcome { passed: true, ..Default::default() };
    out.file("envelope.csv", diag.envelope_csv());
    out.json(
        "summary.json",
        &json!({
            "j_max": diag.j_max,
            "fitted": diag.fitted,
            "omega": diag.omega(),
            "records": diag.record_minima.len(),
            "infimum_witness": diag.infimum_witness,
            "bits": ctx.precision.bits,
        }),
    )?;
    out.summary = match diag.omega() {
        Some(w) => format!("omega_hat = {w:.6}"),
        None => "omega_hat = infinity (vanishing product)".into(),
    };
    Ok(out)
}

fn mad_sum(c: config::MadSum, ctx: &RunContext) -> Result<Outcome> {
    if c.grid.is_empty() {
        return Err(Error::Config("grid: must not be empty".into()));
    }
    let l = c.log_power.unwrap_or(c.matrix.len() as u32);
    let full = madsum::fit_sum_constant(&c.matrix, c.omega, l, &c.grid, ctx.precision)?;
    let (fit_on, frozen) = match c.fit_max {
        Some(m) => {
            let train: Vec<i64> = c.grid.iter().copied().filter(|&j| j <= m).collect();
            if train.is_empty() {
                return Err(Error::Config("fit_max: no grid point lies below it".into()));
            }
            let fit = madsum::fit_sum_constant(&c.matrix, c.omega, l, &train, ctx.precision)?;
            (train.len(), full.with_constant(fit.c))
        }
        None => (c.grid.len(), full),
    };
    let passed = frozen.rows.iter().all(|r| r.slack >= 0.0);
    let mut out = Outcome { passed, ..Default::default() };
    out.file("sum_fit.csv", frozen.csv());
    out.json(
        "summary.json",
        &json!({ "c": frozen.c, "omega": c.omega, "log_power": l, "fit_points": fit_on, "passed": passed, "bits": ctx.precision.bits }),
    )?;
    out.summary = format!("C = {:.6e}, {} of {} rows within the bound", frozen.c, frozen.rows.iter().filter(|r| r.slack >= 0.0).count(), frozen.rows.len());
    Ok(out)
}

#[derive(Serialize)]
struct SelbergRow {
    delta: String,
    degree: u32,
    b0_ok: bool,
    bounds_ok: bool,
    points: usize,
    skipped: usize,
    violations: usize,
    slow_path: usize,
}

/// Jittered grid `y_i = (i + u_i)/N` in `[0, 1)`.
pub fn selberg_grid(seed: u64, points: u64) -> Vec<Rational> {
    let s = Sampler::new(seed, points);
    let unit = Ball::unit(1);
    (0..points).map(|i| s.point(&unit, i).remove(0)).collect()
}

fn selberg_check(c: config::SelbergCheck, ctx: &RunContext) -> Result<Outcome> {
    let ys = selberg_grid(ctx.seed, c.points);
    let mut rows = Vec::new();
    for d in &c.deltas {
        let delta = rational("deltas", d)?;
        for &j in &c.degrees {
            let plus = TrigPolynomial::construct(&delta, j, Sign::Majorant, ctx.precision.bits)?;
            let minus = TrigPolynomial::construct(&delta, j, Sign::Minorant, ctx.precision.bits)?;
            let b0_ok = plus.mean().contains_rational(&plus.expected_b0()) && minus.mean().contains_rational(&minus.expected_b0());
            let bounds_ok = plus.coefficients_within_bounds() && minus.coefficients_within_bounds();
            let g = majorization_grid(&minus, &plus, &ys)?;
            rows.push(SelbergRow {
                delta: delta.to_string(),
                degree: j,
                b0_ok,
                bounds_ok,
                points: g.points,
                skipped: g.skipped_endpoints,
                violations: g.violations,
                slow_path: g.slow_path,
            });
        }
    }
    let passed = rows.iter().all(|r| r.b0_ok && r.bounds_ok && r.violations == 0);
    let mut csv = String::from("delta,degree,b0_ok,bounds_ok,points,skipped,violations,slow_path\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{},{},{},{}", r.delta, r.degree, r.b0_ok, r.bounds_ok, r.points, r.skipped, r.violations, r.slow_path);
    }
    let mut out = Outcome { passed, ..Default::default() };
    out.file("selberg.csv", csv);
    out.json("summary.json", &json!({ "rows": rows, "passed": passed, "bits": ctx.precision.bits }))?;
    out.summary = format!("{} polynomial pairs, {} violations", rows.len(), rows.iter().map(|r| r.violations).sum::<usize>());
    Ok(out)
}

fn count_verify(c: config::CountVerify, ctx: &RunContext) -> Result<Outcome> {
    let mut single = Vec::new();
    for e in c.single {
        let delta = rational("single.delta", &e.delta)?;
        let n = e.subspace.n();
        let ball = checked_ball(Some(e.ball), n)?;
        let cc = match e.c {
            Some(v) => v,
            None => counting::single_bound_constant(&e.subspace, e.omega, &e.fit_grid, ctx.precision)?,
        };
        let config = CountConfig { subspace: e.subspace, q: e.q, delta, ball };
        config.validate()?;
        single.push(SingleCheck { config, omega: e.omega, c: cc });
    }
    let mut aggregate = Vec::new();
    if let Some(agg) = c.aggregate {
        let ball = checked_ball(Some(agg.ball), agg.subspace.n())?;
        for t in 1..=agg.t_max {
            aggregate.push(AggregateConfig { subspace: agg.subspace.clone(), psi: agg.psi.clone(), k: agg.k, t, ball: ball.clone() });
        }
    }
    let rep = counting::verify_counting_sweep(&single, &aggregate, ctx.precision, ctx.budget)?;
    let single_ok = rep.rows.iter().filter(|r| r.kind == "single").all(|r| r.status == Status::Pass);
    let agg_ok = aggregate.is_empty() || rep.t0.is_some();
    let mut out = Outcome { passed: single_ok && agg_ok, ..Default::default() };
    out.file("sweep.csv", rep.csv());
    out.json("report.json", &json!({ "rows": rep.rows, "t0": rep.t0, "passed": out.passed, "bits": ctx.precision.bits }))?;
    out.summary = format!("{} rows, t0 = {:?}", rep.rows.len(), rep.t0);
    Ok(out)
}

fn minkowski_solve(c: config::MinkowskiSolve, ctx: &RunContext) -> Result<Outcome> {
    let bounds = c.bounds.into_iter().map(Threshold::exact).collect();
    let sys = LinearFormsSystem::new(c.beta, bounds).map_err(|e| Error::Config(e.to_string()))?;
    let det = sys.determinant();
    let mut out = Outcome::default();
    if !sys.minkowski_condition(ctx.precision)? {
        out.json("solution.json", &json!({ "det": det, "condition": false, "x": null }))?;
        out.summary = "determinant condition fails".into();
        return Ok(out);
    }
    let x = lattice::solve_linear_forms(
        &sys,
        SolveOptions { last_positive: c.last_positive, budget: u64_budget(ctx), precision: ctx.precision },
    )?;
    let forms: Vec<String> = (0..sys.dim()).map(|i| format!("{:.17e}", sys.form(i, &x).to_f64())).collect();
    out.passed = sys.satisfied_by(&x, ctx.precision)?;
    out.json("solution.json", &json!({ "det": det, "condition": true, "x": x, "forms": forms, "certified": out.passed }))?;
    out.summary = format!("x = {x:?}");
    Ok(out)
}

fn cover_check(c: config::CoverCheck, ctx: &RunContext) -> Result<Outcome> {
    let n = c.subspace.n();
    let ball = checked_ball(c.ball, n)?;
    let sampler = Sampler::with_at_least(ctx.seed, c.samples, n);
    let total = sampler.count(n);
    let witnesses: Vec<lattice::CoveringWitness> = (0..total)
        .into_par_iter()
        .map(|i| {
            let x = sampler.exact_point(&ball, i);
            lattice::covering_witness(&x, c.n_big, &c.psi, &c.subspace, u64_budget(ctx), ctx.precision)
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("index,q");
    for i in 1..=n {
        let _ = write!(csv, ",p{i}");
    }
    for i in 1..=c.subspace.codim() {
        let _ = write!(csv, ",r{i}");
    }
    csv.push_str(",radius_ok,closeness_ok,height_ok,statement_radius_ok,distance,proof_radius\n");
    for (i, w) in witnesses.iter().enumerate() {
        let _ = write!(csv, "{i},{}", w.p_hat.q);
        for p in w.p_hat.p.iter().chain(&w.r) {
            let _ = write!(csv, ",{p}");
        }
        let _ = writeln!(
            csv,
            ",{},{},{},{},{:.17e},{:.17e}",
            w.radius_ok, w.closeness_ok, w.height_ok, w.statement_radius_ok, w.distance, w.proof_radius
        );
    }
    let valid = witnesses.iter().filter(|w| w.valid()).count();
    let statement = witnesses.iter().filter(|w| w.statement_radius_ok).count();
    let mut out = Outcome { passed: valid == witnesses.len(), ..Default::default() };
    out.file("witnesses.csv", csv);
    out.json(
        "summary.json",
        &json!({ "samples": total, "valid": valid, "statement_radius_ok": statement, "n_big": c.n_big, "passed": out.passed, "bits": ctx.precision.bits }),
    )?;
    out.summary = format!("{valid}/{total} certified witnesses");
    Ok(out)
}

fn ubiquity_verify(c: config::UbiquityVerify, ctx: &RunContext) -> Result<Outcome> {
    let n = c.subspace.n();
    let ball = checked_ball(c.ball, n)?;
    if c.t_min < 1 || c.t_max < c.t_min {
        return Err(Error::Config("t_min/t_max: need 1 <= t_min <= t_max".into()));
    }
    let cfg = CoverConfig {
        subspace: c.subspace.clone(),
        psi: c.psi.clone(),
        k: c.k,
        t: c.t_min,
        ball,
        samples: c.samples,
        rho_scale: Rational::from(1),
        kappa_target: c.kappa_target,
    };
    let rep = ubiquity::verify_ubiquity(&cfg, c.t_min, c.t_max, ctx.seed, ctx.precision, ctx.budget)?;
    let mut out = Outcome { passed: rep.passed(), ..Default::default() };
    let mut csv = String::from("t,hits,samples,fraction,ci_low,ci_high,rho\n");
    for l in &rep.levels {
        let _ = writeln!(csv, "{},{},{},{:.6},{:.6},{:.6},{:.17e}", l.t, l.hits, l.samples, l.fraction, l.ci_low, l.ci_high, l.rho);
    }
    out.file("levels.csv", csv);
    if let Some(qm) = c.resonant_q_max {
        let pts = ubiquity::resonant_points(&c.subspace, &c.psi, qm, ctx.precision, &mut Budget::new(ctx.budget))?;
        out.file("resonant.csv", ubiquity::resonant_csv(&pts, &c.psi, c.subspace.d(), n));
    }
    out.json("ubiquity.json", &rep)?;
    out.summary = format!("kappa = {:.4}, stable = {}, k above threshold = {}", rep.kappa, rep.stable, rep.k_above_threshold);
    Ok(out)
}

fn approx_measure(c: config::ApproxMeasure, ctx: &RunContext) -> Result<Outcome> {
    let rep = approx::empirical_measure(&c.subspace, &c.psi, &c.heights, c.samples, c.q_min, ctx.seed, ctx.precision, ctx.budget)?;
    let last = rep.rows.last().map(|r| r.fraction).unwrap_or(0.0);
    let passed = rep.increasing() && c.min_fraction.is_none_or(|m| last >= m);
    let mut out = Outcome { passed, ..Default::default() };
    out.file("measure.csv", rep.csv());
    out.json("measure.json", &rep)?;
    out.summary = format!("fraction at largest Q = {last:.4}");
    Ok(out)
}

fn dimension(c: config::Dimension, ctx: &RunContext) -> Result<Outcome> {
    let cfg = DimensionConfig {
        subspace: c.subspace,
        tau: rational("tau", &c.tau)?,
        log2_q_min: c.log2_q_min,
        log2_q_max: c.log2_q_max,
    };
    let est = approx::box_dimension(&cfg, ctx.seed, ctx.precision, ctx.budget)?;
    let passed = (est.slope - est.formula_value).abs() <= c.tolerance;
    let mut out = Outcome { passed, ..Default::default() };
    out.json("dimension.json", &est)?;
    out.summary = format!("slope {:.4} vs formula {:.4}", est.slope, est.formula_value);
    Ok(out)
}

/// Seeded random power-log instances plus the two reference series.
pub fn series_instances(random: u32, seed: u64) -> Vec<(ApproxFunction, usize, usize, Rational)> {
    let mut v = vec![(ApproxFunction::power(Rational::from((1, 2))).unwrap(), 2, 1, Rational::from(1))];
    for e in [1i64, 5, 10] {
        let eps = Rational::from((e, 100));
        v.push((approx::hausdorff_cantelli_function(2, 1, &Rational::from(1), &eps).unwrap(), 2, 1, Rational::from(1)));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..random {
        let d = rng.gen_range(2..=4usize);
        let n = rng.gen_range(1..d);
        let s = Rational::from((rng.gen_range(0..=2 * n as i64), 2));
        let tau = Rational::from((rng.gen_range(0..=12i64), 4));
        let sigma = Rational::from((rng.gen_range(0..=8i64), 4));
        let psi = ApproxFunction::power_log(Rational::from(1), tau, sigma).unwrap();
        v.push((psi, d, n, s));
    }
    v
}

fn classify_series(c: config::ClassifySeries, ctx: &RunContext) -> Result<Outcome> {
    let mut inst = Vec::new();
    for i in c.instances {
        inst.push((i.psi, i.d, i.n, rational("instances.s", &i.s)?));
    }
    if c.random > 0 {
        inst.extend(series_instances(c.random, ctx.seed));
    }
    let mut csv = String::from("index,d,n,s,psi,class,growth,last_block_ratio,agree\n");
    let mut agree_all = true;
    for (i, (psi, d, n, s)) in inst.iter().enumerate() {
        let cls = approx::divergence_classifier(psi, *d, *n, s)?;
        let cond = approx::condensation_check(psi, *d, *n, s, c.k, c.t_max)?;
        let agree = (cls == SeriesClass::Diverges) == cond.growth;
        agree_all &= agree;
        let ratio = cond.last_block_ratio.map(|r| format!("{r:.6e}")).unwrap_or_default();
        let cls = if cls == SeriesClass::Diverges { "diverges" } else { "converges" };
        let _ = writeln!(csv, "{i},{d},{n},{s},\"{psi}\",{cls},{},{ratio},{agree}", cond.growth);
    }
    let mut out = Outcome { passed: agree_all, ..Default::default() };
    out.file("classify.csv", csv);
    out.summary = format!("{} instances, all agree = {agree_all}", inst.len());
    Ok(out)
}
