//! Simulation configuration.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use super::adversary::Strategy;
use crate::protocol::{NodeId, ParamsError, ProtocolParams, RoleOverride};
use crate::rng::derive_rng;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("node id {0} out of range")]
    UnknownNode(NodeId),
    #[error("strategy assigned to uncorrupted node {0}")]
    StrategyForHonest(NodeId),
    #[error("{0}")]
    Invalid(String),
}

/// A transaction input at a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxInput {
    pub t_ms: u64,
    pub node: NodeId,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub params: ProtocolParams,
    pub gst_ms: u64,
    pub horizon_slots: u64,
    pub seed: u64,
    /// Fixed before any randomness is drawn.
    pub corrupted: BTreeSet<NodeId>,
    /// Corrupted nodes without an entry behave honestly.
    pub strategies: BTreeMap<NodeId, Vec<Strategy>>,
    pub role_overrides: BTreeMap<u64, RoleOverride>,
    pub workload: Vec<TxInput>,
    /// Atomic-broadcast confirmation latency.
    pub delta_ab_ms: u64,
    pub ab_c: u64,
    /// Varies only the proposers' encoding randomness.
    pub encoding_salt: u64,
    /// Slot periods after a decision before missing shreds are flagged.
    pub stall_periods: u64,
    /// Pre-GST delays are capped at this many slot periods.
    pub pre_gst_cap_periods: u64,
    /// Per-proposer `(K', T')` splits.
    pub splits: BTreeMap<NodeId, (usize, usize)>,
}

impl SimConfig {
    pub fn new(params: ProtocolParams, horizon_slots: u64, seed: u64) -> Self {
        let delta = params.delta_ms;
        SimConfig {
            params,
            gst_ms: 0,
            horizon_slots,
            seed,
            corrupted: BTreeSet::new(),
            strategies: BTreeMap::new(),
            role_overrides: BTreeMap::new(),
            workload: Vec::new(),
            delta_ab_ms: delta,
            ab_c: 0,
            encoding_salt: 0,
            stall_periods: 10,
            pre_gst_cap_periods: 10,
            splits: BTreeMap::new(),
        }
    }

    pub fn corrupt(&mut self, node: NodeId, strategies: Vec<Strategy>) -> &mut Self {
        self.corrupted.insert(node);
        if !strategies.is_empty() {
            self.strategies.insert(node, strategies);
        }
        self
    }

    pub fn is_honest(&self, node: NodeId) -> bool {
        !self.corrupted.contains(&node)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        let n = self.params.n as NodeId;
        let check = |id: NodeId| if id < n { Ok(()) } else { Err(ConfigError::UnknownNode(id)) };
        for &c in &self.corrupted {
            check(c)?;
        }
        for &node in self.strategies.keys() {
            check(node)?;
            if !self.corrupted.contains(&node) {
                return Err(ConfigError::StrategyForHonest(node));
            }
        }
        for tx in &self.workload {
            check(tx.node)?;
        }
        for o in self.role_overrides.values() {
            for &id in o.proposers.iter().flatten().chain(o.relays.iter().flatten()).chain(o.leader.iter()) {
                check(id)?;
            }
            if let Some(r) = &o.relays {
                let distinct: BTreeSet<_> = r.iter().collect();
                if r.len() != self.params.n_relay || distinct.len() != r.len() {
                    return Err(ConfigError::Invalid(format!(
                        "relay override must list {} distinct nodes",
                        self.params.n_relay
                    )));
                }
            }
            if o.proposers.as_ref().is_some_and(|p| p.is_empty()) {
                return Err(ConfigError::Invalid("proposer override is empty".into()));
            }
        }
        let threshold = self.params.thr_reconstruct();
        for (&node, &(k, t)) in &self.splits {
            check(node)?;
            if k == 0 || k + t != threshold || t < self.params.t() {
                return Err(ConfigError::Invalid(format!(
                    "split ({k}, {t}) for node {node} must have K' > 0, K' + T' = {threshold}, T' >= {}",
                    self.params.t()
                )));
            }
        }
        if self.horizon_slots == 0 {
            return Err(ConfigError::Invalid("horizon must cover at least one slot".into()));
        }
        if self.delta_ab_ms > 2 * self.params.delta_ms {
            return Err(ConfigError::Invalid("confirmation latency exceeds two network delays".into()));
        }
        Ok(())
    }
}

/// Poisson-ish workload: about `rate` transactions per slot period, each to
/// a uniformly chosen node, with unique 16-byte payloads.
pub fn generate_workload(params: &ProtocolParams, horizon_slots: u64, rate: f64, seed: u64) -> Vec<TxInput> {
    let mut rng: ChaCha20Rng = derive_rng(seed, "workload", 0);
    let end = params.slot_start(horizon_slots);
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mean_gap = params.slot_period_ms as f64 / rate;
    let mut t = 0.0f64;
    let mut counter = 0u64;
    loop {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        t += -u.ln() * mean_gap;
        if t as u64 > end {
            break;
        }
        let mut payload = counter.to_be_bytes().to_vec();
        payload.extend_from_slice(&rng.gen::<u64>().to_be_bytes());
        counter += 1;
        out.push(TxInput {
            t_ms: t as u64,
            node: rng.gen_range(0..params.n) as NodeId,
            payload,
        });
    }
    out
}
