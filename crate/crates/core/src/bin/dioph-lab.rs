use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSub};
use dioph_lab::cli::ledger::{self, RunOptions};
use dioph_lab::cli::Subcommand;
use dioph_lab::Error;

#[derive(Parser)]
#[command(name = "dioph-lab", version, about = "Certified experiments in Diophantine approximation on affine subspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config for the subcommand.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Precision floor in bits for certified comparisons.
    #[arg(long, default_value_t = 128)]
    bits: u32,
    /// Cap on membership tests.
    #[arg(long, default_value_t = 1_000_000_000_000)]
    budget: u128,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(ClapSub)]
enum Command {
    /// Estimate the multiplicative exponent from record minima.
    MadEstimate(Common),
    /// Certified MAD sums and the growth-constant fit.
    MadSum(Common),
    /// Selberg polynomial coefficient and majorization checks.
    SelbergCheck(Common),
    /// Counting bounds: single ball and aggregate levels.
    CountVerify(Common),
    /// Solve a system of linear forms.
    MinkowskiSolve(Common),
    /// Covering witnesses from the containment system.
    CoverCheck(Common),
    /// Covering fraction of resonant balls across levels.
    UbiquityVerify(Common),
    /// Empirical measure of the approximable set.
    ApproxMeasure(Common),
    /// Box-counting dimension against the closed form.
    Dimension(Common),
    /// Divergence classification against the condensed series.
    ClassifySeries(Common),
    /// Re-execute a ledger entry and compare output digests.
    Replay {
        run_id: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the recorded thread count.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common) = match cli.command {
        Command::Replay { run_id, out, threads } => {
            return match ledger::replay(&run_id, &out, threads) {
                Ok(v) => {
                    for f in &v.files {
                        let ok = f.actual.as_deref() == Some(f.expected.as_str());
                        println!("{} {}", if ok { "match   " } else { "MISMATCH" }, f.name);
                    }
                    if v.matched() {
                        println!("replay {} matched with {} thread(s)", v.run_id, v.threads);
                        ExitCode::SUCCESS
                    } else {
                        fail(&Error::ReplayMismatch(format!("run {}", v.run_id)))
                    }
                }
                Err(e) => fail(&e),
            };
        }
        Command::MadEstimate(c) => (Subcommand::MadEstimate, c),
        Command::MadSum(c) => (Subcommand::MadSum, c),
        Command::SelbergCheck(c) => (Subcommand::SelbergCheck, c),
        Command::CountVerify(c) => (Subcommand::CountVerify, c),
        Command::MinkowskiSolve(c) => (Subcommand::MinkowskiSolve, c),
        Command::CoverCheck(c) => (Subcommand::CoverCheck, c),
        Command::UbiquityVerify(c) => (Subcommand::UbiquityVerify, c),
        Command::ApproxMeasure(c) => (Subcommand::ApproxMeasure, c),
        Command::Dimension(c) => (Subcommand::Dimension, c),
        Command::ClassifySeries(c) => (Subcommand::ClassifySeries, c),
    };
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => return fail(&Error::Config(format!("{}: {e}", common.config.display()))),
    };
    let opts = RunOptions {
        seed: common.seed,
        threads: common.threads,
        bits: common.bits,
        budget: common.budget,
        out_dir: common.out,
    };
    match ledger::run(sub, &text, &opts) {
        Ok(rec) => {
            println!("{} {} {}", rec.run_id, if rec.passed { "pass" } else { "FAIL" }, rec.summary);
            println!("outputs: {}", opts.out_dir.join(&rec.run_id).display());
            if rec.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => fail(&e),
    }
}
