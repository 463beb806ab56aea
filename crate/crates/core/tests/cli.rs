use std::process::Command;

use dioph_lab::cli::ledger::{self, RunOptions};
use dioph_lab::cli::Subcommand;
use dioph_lab::Error;

fn opts(dir: &std::path::Path, threads: usize) -> RunOptions {
    RunOptions {
        seed: 7,
        threads,
        bits: 128,
        budget: 1_000_000_000,
        out_dir: dir.to_path_buf(),
    }
}

const COVER: &str = r#"
subspace = { d = 2, n = 1, tilt = [["sqrt(2)"]], shift = ["0"] }
psi = { kind = "power_log", tau = "1/2" }
n_big = 1000
samples = 64
"#;

#[test]
fn run_writes_outputs_and_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let rec = ledger::run(Subcommand::CoverCheck, COVER, &opts(dir.path(), 1)).unwrap();
    assert!(rec.passed);
    let run_dir = dir.path().join(&rec.run_id);
    for name in ["witnesses.csv", "summary.json", "config.toml", "record.json"] {
        assert!(run_dir.join(name).exists(), "{name}");
    }
    let entries = ledger::read_ledger(dir.path()).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0], rec);
}

#[test]
fn run_id_ignores_threads_and_whitespace() {
    let dir = tempfile::tempdir().unwrap();
    let a = ledger::run(Subcommand::CoverCheck, COVER, &opts(dir.path(), 1)).unwrap();
    let spaced = COVER.replace(" = ", "   =   ");
    let b = ledger::run(Subcommand::CoverCheck, &spaced, &opts(dir.path(), 4)).unwrap();
    assert_eq!(a.run_id, b.run_id);
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(ledger::read_ledger(dir.path()).unwrap().len(), 2);
}

#[test]
fn replay_matches_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let rec = ledger::run(Subcommand::CoverCheck, COVER, &opts(dir.path(), 1)).unwrap();
    for t in [1, 4] {
        let v = ledger::replay(&rec.run_id, dir.path(), Some(t)).unwrap();
        assert!(v.matched(), "{v:?}");
    }
}

#[test]
fn replay_detects_tampered_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let rec = ledger::run(Subcommand::CoverCheck, COVER, &opts(dir.path(), 1)).unwrap();
    let path = dir.path().join(ledger::LEDGER_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let digest = &rec.outputs["summary.json"];
    std::fs::write(&path, text.replace(digest.as_str(), &"0".repeat(64))).unwrap();
    assert!(!ledger::replay(&rec.run_id, dir.path(), None).unwrap().matched());
}

#[test]
fn unknown_run_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let err = ledger::replay("0123456789abcdef", dir.path(), None).unwrap_err();
    assert!(matches!(err, Error::NotFound(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn missing_fields_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let err = ledger::run(Subcommand::UbiquityVerify, "k = 45\n", &opts(dir.path(), 1)).unwrap_err();
    let msg = err.to_string();
    for f in ["subspace", "psi", "t_min", "t_max"] {
        assert!(msg.contains(f), "{msg}");
    }
    assert!(!msg.contains(" k,"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{COVER}\ncolour = 3\n");
    let err = ledger::run(Subcommand::CoverCheck, &text, &opts(dir.path(), 1)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_dioph-lab");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.toml");
    std::fs::write(
        &cfg,
        "beta = [[\"-1\", \"0\", \"sqrt(2)\"], [\"0\", \"-1\", \"sqrt(3)\"], [\"0\", \"0\", \"1\"]]\nbounds = [\"1/10\", \"1/10\", \"100\"]\nlast_positive = true\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = Command::new(exe)
        .args(["minkowski-solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let id = String::from_utf8(run.stdout).unwrap().split_whitespace().next().unwrap().to_string();

    let replay = Command::new(exe).args(["replay", &id, "--threads", "4", "--out"]).arg(&out).output().unwrap();
    assert_eq!(replay.status.code(), Some(0));

    let missing = Command::new(exe).args(["replay", "ffffffffffffffff", "--out"]).arg(&out).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    std::fs::write(&cfg, "beta = [[\"1\"]]\nbounds = [\"1/2\"]\n").unwrap();
    let bad_det = Command::new(exe).args(["minkowski-solve", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(bad_det.status.code(), Some(1));

    std::fs::write(&cfg, "").unwrap();
    let empty = Command::new(exe).args(["dimension", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(empty.status.code(), Some(2));
    let err = String::from_utf8_lossy(&empty.stderr);
    assert!(err.contains("tau") && err.contains("log2_q_min") && err.contains("log2_q_max"), "{err}");
}

#[test]
fn budget_exhaustion_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut o = opts(dir.path(), 1);
    o.budget = 10;
    let text = "[[single]]\nsubspace = { d = 2, n = 1, tilt = [[\"sqrt(2)\"]], shift = [\"0\"] }\nq = 5000\ndelta = \"1/4\"\nball = { center = [\"1/2\"], radius = \"1/2\" }\nomega = 1.05\nc = 10.0\n";
    let err = ledger::run(Subcommand::CountVerify, text, &o).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}
