//! Config schemas, one per subcommand.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::approx_fn::ApproxFunction;
use crate::error::{Error, Result};
use crate::exact::ExactReal;
use crate::subspace::{AffineSubspaceSpec, Ball};

use super::Subcommand;

/// Top-level keys that must be present, listed together when missing.
pub fn required_fields(sub: Subcommand) -> &'static [&'static str] {
    match sub {
        Subcommand::MadEstimate => &["matrix", "j_max"],
        Subcommand::MadSum => &["matrix", "omega", "grid"],
        Subcommand::SelbergCheck => &["deltas", "degrees"],
        Subcommand::CountVerify => &[],
        Subcommand::MinkowskiSolve => &["beta", "bounds"],
        Subcommand::CoverCheck => &["subspace", "psi", "n_big", "samples"],
        Subcommand::UbiquityVerify => &["subspace", "psi", "k", "t_min", "t_max"],
        Subcommand::ApproxMeasure => &["subspace", "psi", "heights", "samples"],
        Subcommand::Dimension => &["tau", "log2_q_min", "log2_q_max"],
        Subcommand::ClassifySeries => &[],
    }
}

/// Parses TOML text, reporting every missing required field at once.
pub fn parse_value(sub: Subcommand, text: &str) -> Result<toml::Value> {
    let v: toml::Value = text.parse::<toml::Table>().map(toml::Value::Table).map_err(|e| Error::Config(e.to_string()))?;
    let table = v.as_table().expect("parsed a table");
    let missing: Vec<&str> = required_fields(sub).iter().copied().filter(|k| !table.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("{}: missing required fields: {}", sub.name(), missing.join(", "))));
    }
    if sub == Subcommand::CountVerify && !table.contains_key("single") && !table.contains_key("aggregate") {
        return Err(Error::Config("count-verify: missing required fields: single or aggregate".into()));
    }
    if sub == Subcommand::ClassifySeries && !table.contains_key("instances") && !table.contains_key("random") {
        return Err(Error::Config("classify-series: missing required fields: instances or random".into()));
    }
    Ok(v)
}

/// Deserializes a standalone TOML document.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
}

pub fn typed<T: DeserializeOwned>(v: &toml::Value) -> Result<T> {
    T::deserialize(v.clone()).map_err(|e| Error::Config(e.to_string().trim().to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MadEstimate {
    pub matrix: Vec<Vec<ExactReal>>,
    pub j_max: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MadSum {
    pub matrix: Vec<Vec<ExactReal>>,
    pub omega: f64,
    /// Log power; defaults to the number of rows.
    pub log_power: Option<u32>,
    pub grid: Vec<i64>,
    /// Fit `C` on `J <= fit_max` only and check the rest with it frozen.
    pub fit_max: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelbergCheck {
    pub deltas: Vec<ExactReal>,
    pub degrees: Vec<u32>,
    #[serde(default = "ten_thousand")]
    pub points: u64,
}

fn ten_thousand() -> u64 {
    10_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleEntry {
    pub subspace: AffineSubspaceSpec,
    pub q: i64,
    pub delta: ExactReal,
    pub ball: Ball,
    pub omega: f64,
    /// Fitted from the grid when absent.
    pub c: Option<f64>,
    #[serde(default = "fit_grid")]
    pub fit_grid: Vec<i64>,
}

fn fit_grid() -> Vec<i64> {
    (3..=10).map(|e| 1i64 << e).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateEntry {
    pub subspace: AffineSubspaceSpec,
    pub psi: ApproxFunction,
    pub k: u64,
    pub t_max: u32,
    pub ball: Ball,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountVerify {
    #[serde(default)]
    pub single: Vec<SingleEntry>,
    pub aggregate: Option<AggregateEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinkowskiSolve {
    pub beta: Vec<Vec<ExactReal>>,
    pub bounds: Vec<ExactReal>,
    #[serde(default)]
    pub last_positive: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverCheck {
    pub subspace: AffineSubspaceSpec,
    pub psi: ApproxFunction,
    pub n_big: u64,
    pub samples: u64,
    pub ball: Option<Ball>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UbiquityVerify {
    pub subspace: AffineSubspaceSpec,
    pub psi: ApproxFunction,
    pub k: u64,
    pub t_min: u32,
    pub t_max: u32,
    pub ball: Option<Ball>,
    #[serde(default = "ten_thousand")]
    pub samples: u64,
    #[serde(default)]
    pub kappa_target: f64,
    /// Also emit the resonant points with `q` up to this height.
    pub resonant_q_max: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxMeasure {
    pub subspace: AffineSubspaceSpec,
    pub psi: ApproxFunction,
    pub heights: Vec<u64>,
    pub samples: u64,
    #[serde(default = "one")]
    pub q_min: u64,
    /// Required fraction at the largest height.
    pub min_fraction: Option<f64>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub subspace: Option<AffineSubspaceSpec>,
    pub tau: ExactReal,
    pub log2_q_min: u32,
    pub log2_q_max: u32,
    #[serde(default = "tenth")]
    pub tolerance: f64,
}

fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesInstance {
    pub psi: ApproxFunction,
    pub d: usize,
    pub n: usize,
    pub s: ExactReal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySeries {
    #[serde(default)]
    pub instances: Vec<SeriesInstance>,
    /// Number of seeded random power-log instances to add.
    #[serde(default)]
    pub random: u32,
    #[serde(default = "two")]
    pub k: u64,
    #[serde(default = "t_max")]
    pub t_max: u64,
}

fn two() -> u64 {
    2
}

fn t_max() -> u64 {
    1 << 14
}

pub fn rational(field: &str, x: &ExactReal) -> Result<rug::Rational> {
    x.as_rational().ok_or_else(|| Error::Config(format!("{field}: expected a rational value, got {x}")))
}
