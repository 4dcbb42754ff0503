//! Fault-probability tables, for one parameter point or a grid.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args;
use mcp_core::analysis::{fault_probabilities, parse_decimal, FaultModel, CSV_HEADER};
use serde::Deserialize;

#[derive(Args, Debug)]
pub struct FaultprobArgs {
    #[arg(long)]
    pub n_relay: Option<u64>,
    /// Per-relay corruption probability.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    /// Hiding threshold in relays; may be fractional.
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long, default_value_t = 400.0)]
    pub slot_ms: f64,
    /// TOML grid: every key is a value or a list of values; rows are the
    /// cartesian product.
    #[arg(long, conflicts_with_all = ["n_relay", "f", "gamma", "phi", "mu", "t"])]
    pub sweep: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sweep {
    n_relay: OneOrMany<u64>,
    f: OneOrMany<String>,
    gamma: OneOrMany<String>,
    phi: OneOrMany<String>,
    mu: OneOrMany<String>,
    t: OneOrMany<String>,
}

fn model(n_relay: u64, f: &str, gamma: &str, phi: &str, mu: &str, t: &str) -> Result<FaultModel> {
    let d = |name: &str, s: &str| parse_decimal(s).with_context(|| format!("--{name}"));
    let m = FaultModel {
        n_relay,
        f: d("f", f)?,
        gamma: d("gamma", gamma)?,
        phi: d("phi", phi)?,
        mu: d("mu", mu)?,
        t: d("t", t)?,
    };
    m.validate()?;
    Ok(m)
}

fn models(args: &FaultprobArgs) -> Result<Vec<FaultModel>> {
    if let Some(path) = &args.sweep {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let s: Sweep = toml::from_str(&text).with_context(|| format!("in {}", path.display()))?;
        let mut out = Vec::new();
        for n in s.n_relay.values() {
            for f in s.f.values() {
                for g in s.gamma.values() {
                    for p in s.phi.values() {
                        for m in s.mu.values() {
                            for t in s.t.values() {
                                out.push(model(n, &f, &g, &p, &m, &t)?);
                            }
                        }
                    }
                }
            }
        }
        return Ok(out);
    }
    let (Some(n), Some(f), Some(g), Some(p), Some(m), Some(t)) =
        (args.n_relay, &args.f, &args.gamma, &args.phi, &args.mu, &args.t)
    else {
        bail!("give --n-relay, --f, --gamma, --phi, --mu and --t, or --sweep");
    };
    Ok(vec![model(n, f, g, p, m, t)?])
}

pub fn table(args: &FaultprobArgs) -> Result<String> {
    if !(args.slot_ms.is_finite() && args.slot_ms > 0.0) {
        bail!("--slot-ms must be positive");
    }
    let mut csv = String::new();
    writeln!(csv, "{CSV_HEADER}")?;
    for m in models(args)? {
        let r = fault_probabilities(&m)?;
        writeln!(csv, "{}", r.csv_row(&m, args.slot_ms))?;
    }
    Ok(csv)
}

pub fn run(args: &FaultprobArgs) -> Result<()> {
    let csv = table(args)?;
    eprintln!("# probabilities that enough Byzantine relays are sampled to make a fault possible, per slot");
    match &args.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
