//! Run records, the append-only ledger, and bit-exact replay.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::precision::Precision;

use super::{config, execute, Outcome, RunContext, Subcommand};

pub const LEDGER_FILE: &str = "ledger.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub subcommand: Subcommand,
    /// Canonical JSON form of the config.
    pub config: serde_json::Value,
    pub config_text: String,
    pub seed: u64,
    pub bits: u32,
    pub budget: String,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    /// File name to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
    pub passed: bool,
    pub summary: String,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub threads: usize,
    pub bits: u32,
    pub budget: u128,
    pub out_dir: PathBuf,
}

impl RunOptions {
    fn context(&self) -> RunContext {
        RunContext {
            seed: self.seed,
            precision: Precision::new(self.bits, (self.bits * 32).max(4096)),
            budget: self.budget,
        }
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the subcommand, canonical config, seed, precision floor and budget.
/// The thread count is deliberately excluded.
pub fn run_id(sub: Subcommand, canonical: &serde_json::Value, seed: u64, bits: u32, budget: u128) -> String {
    let text = format!("{}\n{}\n{seed}\n{bits}\n{budget}", sub.name(), canonical);
    digest(text.as_bytes())[..16].to_string()
}

fn canonical(v: &toml::Value) -> Result<serde_json::Value> {
    // serde_json maps are ordered by key, which makes this form canonical.
    serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))?;
    Ok(pool.install(f))
}

/// Executes without touching the filesystem.
pub fn evaluate(sub: Subcommand, config_text: &str, opts: &RunOptions) -> Result<(serde_json::Value, Outcome)> {
    let value = config::parse_value(sub, config_text)?;
    let canon = canonical(&value)?;
    let ctx = opts.context();
    let outcome = in_pool(opts.threads, || execute(sub, &value, &ctx))??;
    Ok((canon, outcome))
}

/// Runs a subcommand, writes `out/<run_id>/` and appends to `out/ledger.jsonl`.
pub fn run(sub: Subcommand, config_text: &str, opts: &RunOptions) -> Result<RunRecord> {
    let started = chrono::Utc::now().to_rfc3339();
    let (canon, outcome) = evaluate(sub, config_text, opts)?;
    let id = run_id(sub, &canon, opts.seed, opts.bits, opts.budget);
    let dir = opts.out_dir.join(&id);
    fs::create_dir_all(&dir)?;
    let mut outputs = BTreeMap::new();
    for (name, body) in &outcome.files {
        fs::write(dir.join(name), body)?;
        outputs.insert(name.clone(), digest(body));
    }
    fs::write(dir.join("config.toml"), config_text)?;
    let record = RunRecord {
        run_id: id,
        subcommand: sub,
        config: canon,
        config_text: config_text.to_string(),
        seed: opts.seed,
        bits: opts.bits,
        budget: opts.budget.to_string(),
        threads: opts.threads,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        outputs,
        passed: outcome.passed,
        summary: outcome.summary,
    };
    let line = serde_json::to_string(&record).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("record.json"), format!("{line}\n"))?;
    let mut ledger = OpenOptions::new().create(true).append(true).open(opts.out_dir.join(LEDGER_FILE))?;
    writeln!(ledger, "{line}")?;
    Ok(record)
}

pub fn read_ledger(out_dir: &Path) -> Result<Vec<RunRecord>> {
    let path = out_dir.join(LEDGER_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Io(format!("{}: {e}", path.display()))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileCheck {
    pub name: String,
    pub expected: String,
    pub actual: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub run_id: String,
    pub threads: usize,
    pub files: Vec<FileCheck>,
}

impl ReplayVerdict {
    pub fn matched(&self) -> bool {
        self.files.iter().all(|f| f.actual.as_deref() == Some(f.expected.as_str()))
    }
}

/// Re-executes the most recent ledger entry for `run_id` and compares digests.
/// `threads` overrides the recorded thread count.
pub fn replay(run_id: &str, out_dir: &Path, threads: Option<usize>) -> Result<ReplayVerdict> {
    let rec = read_ledger(out_dir)?
        .into_iter()
        .rev()
        .find(|r| r.run_id == run_id)
        .ok_or_else(|| Error::NotFound(format!("run {run_id} is not in {}", out_dir.join(LEDGER_FILE).display())))?;
    let budget = rec.budget.parse::<u128>().map_err(|e| Error::Io(format!("ledger budget: {e}")))?;
    let threads = threads.unwrap_or(rec.threads);
    let opts = RunOptions {
        seed: rec.seed,
        threads,
        bits: rec.bits,
        budget,
        out_dir: out_dir.to_path_buf(),
    };
    let (_, outcome) = evaluate(rec.subcommand, &rec.config_text, &opts)?;
    let mut names: Vec<&String> = rec.outputs.keys().chain(outcome.files.keys()).collect();
    names.sort();
    names.dedup();
    let files = names
        .into_iter()
        .map(|n| FileCheck {
            name: n.clone(),
            expected: rec.outputs.get(n).cloned().unwrap_or_default(),
            actual: outcome.files.get(n).map(|b| digest(b)),
        })
        .collect();
    Ok(ReplayVerdict {
        run_id: rec.run_id,
        threads,
        files,
    })
}
