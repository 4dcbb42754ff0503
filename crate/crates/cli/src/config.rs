//! TOML run configuration. Durations are milliseconds; fractions are decimal
//! strings (`"0.8"`) or ratios (`"4/5"`) so nothing is lost to binary floats.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};
use mcp_core::analysis::parse_decimal;
use mcp_core::protocol::{Fraction, NodeId, ProtocolParams, RoleOverride};
use mcp_core::sim::{generate_workload, SimConfig, Strategy, TxInput};
use mcp_core::Field;
use num_traits::{Signed, ToPrimitive};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub params: ParamsSection,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub roles: Vec<RoleSection>,
    #[serde(default)]
    pub checks: ChecksSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub n: usize,
    pub n_prop: Option<usize>,
    pub n_relay: usize,
    #[serde(default = "default_mu")]
    pub mu: String,
    #[serde(default = "default_phi")]
    pub phi: String,
    #[serde(default = "default_gamma")]
    pub gamma: String,
    #[serde(default = "default_tau")]
    pub tau: String,
    #[serde(default = "default_delta")]
    pub delta_ms: u64,
    #[serde(default = "default_period")]
    pub slot_period_ms: u64,
    #[serde(default)]
    pub gst_ms: u64,
    pub horizon_slots: u64,
    /// Decimal string or integer; defaults to 2^61 - 1.
    pub field_modulus: Option<toml::Value>,
    pub max_rows: Option<usize>,
    pub delta_ab_ms: Option<u64>,
    pub stall_periods: Option<u64>,
}

fn default_mu() -> String {
    "0.8".into()
}
fn default_phi() -> String {
    "0.6".into()
}
fn default_gamma() -> String {
    "0.4".into()
}
fn default_tau() -> String {
    "0.2".into()
}
fn default_delta() -> u64 {
    100
}
fn default_period() -> u64 {
    300
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    #[serde(default)]
    pub corrupted: Vec<NodeId>,
    /// Strategy for every node in `corrupted` without its own entry.
    pub strategy: Option<String>,
    pub strategy_args: Option<toml::Table>,
    /// Per-node strategy lists, e.g. `{ id = 3, strategies = [{ name = "crash" }] }`.
    #[serde(default)]
    pub node: Vec<NodeStrategies>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeStrategies {
    pub id: NodeId,
    pub strategies: Vec<Strategy>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    #[serde(default)]
    pub txs: Vec<TxSpec>,
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub t_ms: u64,
    pub node: NodeId,
    pub payload_hex: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Mean transactions per slot period.
    pub rate: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleSection {
    pub slot: u64,
    pub leader: Option<NodeId>,
    pub relays: Option<Vec<NodeId>>,
    pub proposers: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    #[serde(default = "yes")]
    pub safety: bool,
    #[serde(default = "yes")]
    pub scr: bool,
    #[serde(default = "yes")]
    pub liveness: bool,
    #[serde(default = "yes")]
    pub delivery: bool,
}

fn yes() -> bool {
    true
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            safety: true,
            scr: true,
            liveness: true,
            delivery: true,
        }
    }
}

pub fn parse_fraction(what: &str, s: &str) -> Result<Fraction> {
    let q = parse_decimal(s).map_err(|e| anyhow!("{what}: {e}"))?;
    if q.is_negative() {
        bail!("{what}: {s} is negative");
    }
    let num = q.numer().to_u64().ok_or_else(|| anyhow!("{what}: {s} out of range"))?;
    let den = q.denom().to_u64().ok_or_else(|| anyhow!("{what}: {s} out of range"))?;
    Ok(Fraction::new(num, den))
}

fn parse_modulus(v: &toml::Value) -> Result<u64> {
    match v {
        toml::Value::Integer(i) => u64::try_from(*i).context("field_modulus must be positive"),
        toml::Value::String(s) => s.trim().parse().context("field_modulus is not an integer"),
        other => bail!("field_modulus must be an integer, got {other}"),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn protocol_params(&self) -> Result<ProtocolParams> {
        let p = &self.params;
        let mut params = ProtocolParams::with_defaults(p.n, p.n_relay);
        params.n_prop = p.n_prop.unwrap_or(p.n);
        params.mu = parse_fraction("mu", &p.mu)?;
        params.phi = parse_fraction("phi", &p.phi)?;
        params.gamma = parse_fraction("gamma", &p.gamma)?;
        params.tau = parse_fraction("tau", &p.tau)?;
        params.delta_ms = p.delta_ms;
        params.slot_period_ms = p.slot_period_ms;
        if let Some(m) = &p.field_modulus {
            params.field = Field::new(parse_modulus(m)?)?;
        }
        if let Some(rows) = p.max_rows {
            params.max_rows = rows;
        }
        params.validate()?;
        Ok(params)
    }

    /// Builds and validates the simulator configuration.
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let params = self.protocol_params()?;
        let mut c = SimConfig::new(params, self.params.horizon_slots, self.seed);
        c.gst_ms = self.params.gst_ms;
        if let Some(d) = self.params.delta_ab_ms {
            c.delta_ab_ms = d;
        }
        if let Some(s) = self.params.stall_periods {
            c.stall_periods = s;
        }

        let adv = &self.adversary;
        let explicit: BTreeMap<NodeId, &Vec<Strategy>> = adv.node.iter().map(|n| (n.id, &n.strategies)).collect();
        if explicit.len() != adv.node.len() {
            bail!("adversary.node lists a node twice");
        }
        let shared = match &adv.strategy {
            Some(name) => {
                let mut table = adv.strategy_args.clone().unwrap_or_default();
                table.insert("name".into(), toml::Value::String(name.clone()));
                let s: Strategy = toml::Value::Table(table)
                    .try_into()
                    .with_context(|| format!("strategy {name:?}"))?;
                Some(s)
            }
            None if adv.strategy_args.is_some() => bail!("strategy_args given without strategy"),
            None => None,
        };
        let corrupted: BTreeSet<NodeId> = adv.corrupted.iter().copied().chain(explicit.keys().copied()).collect();
        for node in corrupted {
            let strategies = match explicit.get(&node) {
                Some(s) => (*s).clone(),
                None => shared.iter().cloned().collect(),
            };
            c.corrupt(node, strategies);
        }

        for r in &self.roles {
            if c.role_overrides.contains_key(&r.slot) {
                bail!("roles: slot {} listed twice", r.slot);
            }
            c.role_overrides.insert(
                r.slot,
                RoleOverride {
                    proposers: r.proposers.clone(),
                    relays: r.relays.clone(),
                    leader: r.leader,
                },
            );
        }

        for tx in &self.workload.txs {
            let payload = hex::decode(tx.payload_hex.trim()).with_context(|| format!("payload_hex {:?}", tx.payload_hex))?;
            c.workload.push(TxInput {
                t_ms: tx.t_ms,
                node: tx.node,
                payload,
            });
        }
        if let Some(g) = &self.workload.generator {
            if !(g.rate.is_finite() && g.rate >= 0.0) {
                bail!("generator rate must be a nonnegative number");
            }
            let seed = g.seed.unwrap_or(self.seed);
            c.workload.extend(generate_workload(&c.params, c.horizon_slots, g.rate, seed));
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [params]
        n = 10
        n_relay = 5
        horizon_slots = 2
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap().to_sim_config().unwrap();
        assert_eq!(c.params, ProtocolParams::with_defaults(10, 5));
        assert_eq!(c.seed, 3);
        assert!(c.corrupted.is_empty() && c.workload.is_empty());
    }

    #[test]
    fn adversary_and_workload() {
        let text = format!(
            "{MINIMAL}\n[adversary]\ncorrupted = [1, 2]\nstrategy = \"withhold_attestations\"\nstrategy_args = {{ targets = [0] }}\n\
             [[adversary.node]]\nid = 3\nstrategies = [{{ name = \"crash\" }}]\n\
             [workload]\ntxs = [{{ t_ms = 5, node = 0, payload_hex = \"beef\" }}]\n"
        );
        let c = RunConfig::parse(&text).unwrap().to_sim_config().unwrap();
        assert_eq!(c.corrupted.len(), 3);
        assert_eq!(c.strategies[&1], vec![Strategy::WithholdAttestations { targets: vec![0] }]);
        assert_eq!(c.strategies[&3], vec![Strategy::Crash]);
        assert_eq!(c.workload[0].payload, vec![0xbe, 0xef]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_phi = MINIMAL.replace("n_relay = 5", "n_relay = 5\nphi = \"0.9\"");
        assert!(RunConfig::parse(&bad_phi).unwrap().to_sim_config().is_err());
        let bad_field = MINIMAL.replace("n_relay = 5", "n_relay = 5\nfield_modulus = 91");
        assert!(RunConfig::parse(&bad_field).unwrap().to_sim_config().is_err());
        let unknown = format!("{MINIMAL}\nbogus = 1\n");
        assert!(RunConfig::parse(&unknown).is_err());
        let bad_node = format!("{MINIMAL}\n[adversary]\ncorrupted = [10]\n");
        assert!(RunConfig::parse(&bad_node).unwrap().to_sim_config().is_err());
        let bad_strategy = format!("{MINIMAL}\n[adversary]\ncorrupted = [1]\nstrategy = \"teleport\"\n");
        assert!(RunConfig::parse(&bad_strategy).unwrap().to_sim_config().is_err());
    }

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("x", "0.8").unwrap(), Fraction::new(4, 5));
        assert_eq!(parse_fraction("x", "3/5").unwrap(), Fraction::new(3, 5));
        assert!(parse_fraction("x", "-1").is_err());
    }
}
