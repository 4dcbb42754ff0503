//! `mcp`: run simulations, fault-probability tables and self-tests.
//!
//! Exit codes: 0 success, 1 property violation, 2 configuration error.

mod config;
mod faultprob;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use mcp_core::selftest::{check_golden, commitment_suite, golden_values, hecc_exhaustive, parse_golden, render_golden};
use mcp_core::sim::{check_all, run_execution, SimReport};

use crate::config::RunConfig;

const BUNDLED_GOLDEN: &str = include_str!("../golden/selftest.txt");

#[derive(Parser)]
#[command(name = "mcp", version, about = "Multiple-concurrent-proposer consensus gadget lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one execution and check it.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-slot potential-fault probabilities as CSV.
    Faultprob(faultprob::FaultprobArgs),
    /// Exhaustive codec and commitment suites plus golden values.
    Selftest {
        /// Golden file to compare against instead of the bundled one.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Print freshly computed golden values and exit.
        #[arg(long)]
        print_golden: bool,
    },
}

/// How a command failed, which decides the exit code.
enum Failure {
    Violation(String),
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed } => simulate(&config, &out, seed),
        Command::Faultprob(args) => faultprob::run(&args).map_err(Failure::Config),
        Command::Selftest { golden, print_golden } => selftest(golden.as_deref(), print_golden),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(what)) => {
            eprintln!("FAILED: {what}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn enabled_failures(run: &RunConfig, report: &SimReport) -> Vec<&'static str> {
    let c = &run.checks;
    report
        .failures()
        .into_iter()
        .filter(|f| match *f {
            "safety" => c.safety,
            "selective-censorship resistance" => c.scr,
            "liveness" => c.liveness,
            "delivery bound" => c.delivery,
            _ => true,
        })
        .collect()
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut run = RunConfig::load(config)?;
    if let Some(s) = seed {
        run.seed = s;
    }
    let sim = run.to_sim_config()?;
    let trace = run_execution(&sim).context("starting execution")?;
    let report = check_all(&trace);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let trace_path = out.join("trace.jsonl");
    let file = fs::File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    trace
        .write_jsonl(std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", trace_path.display()))?;
    let failures = enabled_failures(&run, &report);
    let verdict = serde_json::json!({
        "seed": run.seed,
        "passed": failures.is_empty(),
        "failures": failures,
        "report": report,
    });
    let report_path = out.join("report.json");
    fs::write(&report_path, serde_json::to_vec_pretty(&verdict).context("serializing report")?)
        .with_context(|| format!("writing {}", report_path.display()))?;

    println!(
        "safety={} scr={} liveness={} delivery={} slots={} txs={} messages={}",
        report.safety.passed,
        report.scr.passed,
        report.liveness.passed,
        report.delivery.passed,
        report.slots_assigned.iter().min().copied().unwrap_or(0),
        report.transactions_input,
        report.messages
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(failures.join(", ")))
    }
}

fn selftest(golden: Option<&Path>, print_golden: bool) -> Result<(), Failure> {
    if print_golden {
        print!("{}", render_golden(&golden_values()));
        return Ok(());
    }
    let golden_text = match golden {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => BUNDLED_GOLDEN.to_string(),
    };
    let suites = [
        hecc_exhaustive(5, 1, 1, 3),
        hecc_exhaustive(5, 1, 1, 4),
        hecc_exhaustive(5, 1, 2, 4),
        commitment_suite(1, 10_000),
        check_golden(&parse_golden(&golden_text)),
    ];
    let mut failed = Vec::new();
    for s in &suites {
        println!("{s}");
        if !s.passed() {
            failed.push(s.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(failed.join(", ")))
    }
}
