//! Property checkers over execution traces.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::trace::{ExecutionTrace, Stall, TracePayload};
use crate::protocol::{NodeId, TxId};

/// Earliest disagreement between two honest nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyViolation {
    pub node_a: NodeId,
    pub node_b: NodeId,
    pub slot: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyReport {
    pub passed: bool,
    pub violation: Option<SafetyViolation>,
    /// A node assigned slots out of order.
    pub order_violation: Option<(NodeId, u64)>,
}

/// Pairwise prefix-comparability of honest logs. Logs only grow by
/// appending, so comparing final logs covers every pair of times; the
/// append order is checked separately from the log records.
pub fn check_safety(trace: &ExecutionTrace) -> SafetyReport {
    let honest: Vec<NodeId> = trace.honest_nodes().collect();
    let mut violation: Option<SafetyViolation> = None;
    for (i, &a) in honest.iter().enumerate() {
        for &b in &honest[i + 1..] {
            let la = &trace.final_logs[a as usize];
            let lb = &trace.final_logs[b as usize];
            if let Some(pos) = la.iter().zip(lb).position(|(x, y)| x != y) {
                let slot = pos as u64 + 1;
                if violation.as_ref().is_none_or(|v| slot < v.slot) {
                    violation = Some(SafetyViolation {
                        node_a: a,
                        node_b: b,
                        slot,
                    });
                }
            }
        }
    }
    let mut next: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut order_violation = None;
    for e in &trace.logs {
        let expected = next.entry(e.node).or_insert(1);
        if e.slot != *expected && order_violation.is_none() && trace.is_honest(e.node) {
            order_violation = Some((e.node, e.slot));
        }
        *expected = e.slot + 1;
    }
    SafetyReport {
        passed: violation.is_none() && order_violation.is_none(),
        violation,
        order_violation,
    }
}

/// The longest final honest log, which extends every other one when safety
/// holds; otherwise their common prefix.
pub fn final_log(trace: &ExecutionTrace) -> Vec<Vec<TxId>> {
    let logs: Vec<&Vec<Vec<TxId>>> = trace.honest_nodes().map(|p| &trace.final_logs[p as usize]).collect();
    let Some(longest) = logs.iter().max_by_key(|l| l.len()) else {
        return Vec::new();
    };
    if check_safety(trace).violation.is_none() {
        return (*longest).clone();
    }
    let mut common = Vec::new();
    for (s, entry) in longest.iter().enumerate() {
        if logs.iter().all(|l| l.get(s).is_none_or(|e| e == entry)) {
            common.push(entry.clone());
        } else {
            break;
        }
    }
    common
}

/// Transactions input to honest proposers of `slot` no later than its start.
fn owed_at(trace: &ExecutionTrace, slot: u64) -> Vec<(u64, NodeId, TxId)> {
    let Some(roles) = trace.roles(slot) else {
        return Vec::new();
    };
    let start = trace.params.slot_start(slot);
    trace
        .tx_inputs
        .iter()
        .filter(|tx| tx.t <= start && trace.is_honest(tx.node) && roles.is_proposer(tx.node))
        .map(|tx| (tx.t, tx.node, tx.id))
        .collect()
}

fn confirmed_by(log: &[Vec<TxId>], slot: u64) -> HashSet<TxId> {
    log.iter().take(slot as usize).flatten().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensorshipViolation {
    pub slot: u64,
    pub tx: String,
    pub input_node: NodeId,
    pub input_time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScrReport {
    pub passed: bool,
    pub slots_checked: u64,
    pub empty_slots: u64,
    pub violations: Vec<CensorshipViolation>,
}

/// For each post-GST slot: either the final log's slot is empty, or every
/// transaction owed at that slot is confirmed by it.
pub fn check_scr(trace: &ExecutionTrace) -> ScrReport {
    let log = final_log(trace);
    let mut violations = Vec::new();
    let mut slots_checked = 0;
    let mut empty_slots = 0;
    for slot in 1..=trace.horizon_slots {
        if trace.params.slot_start(slot) < trace.gst_ms {
            continue;
        }
        let Some(entry) = log.get(slot as usize - 1) else {
            continue;
        };
        slots_checked += 1;
        if entry.is_empty() {
            empty_slots += 1;
            continue;
        }
        let confirmed = confirmed_by(&log, slot);
        for (t, node, id) in owed_at(trace, slot) {
            if !confirmed.contains(&id) {
                violations.push(CensorshipViolation {
                    slot,
                    tx: hex::encode(id),
                    input_node: node,
                    input_time: t,
                });
            }
        }
    }
    ScrReport {
        passed: violations.is_empty(),
        slots_checked,
        empty_slots,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LivenessReport {
    pub passed: bool,
    pub stalls: Vec<Stall>,
    /// Honest-leader post-GST slots where an owed transaction is missing at
    /// some honest node: (slot, node, tx).
    pub slot_failures: Vec<(u64, NodeId, String)>,
    /// Transactions that had an honest-leader post-GST slot available but
    /// never reached every honest log: (tx, node).
    pub missing: Vec<(String, NodeId)>,
}

pub fn check_liveness(trace: &ExecutionTrace) -> LivenessReport {
    let honest: Vec<NodeId> = trace.honest_nodes().collect();
    let good_slot = |s: u64| {
        trace.params.slot_start(s) >= trace.gst_ms
            && trace.roles(s).is_some_and(|r| trace.is_honest(r.leader))
    };
    let mut slot_failures = Vec::new();
    for s in (1..=trace.horizon_slots).filter(|&s| good_slot(s)) {
        let owed = owed_at(trace, s);
        if owed.is_empty() {
            continue;
        }
        for &p in &honest {
            let log = &trace.final_logs[p as usize];
            let confirmed = confirmed_by(log, s);
            for (_, _, id) in &owed {
                if log.len() < s as usize || !confirmed.contains(id) {
                    slot_failures.push((s, p, hex::encode(id)));
                }
            }
        }
    }
    let mut missing = Vec::new();
    for tx in &trace.tx_inputs {
        if !trace.is_honest(tx.node) {
            continue;
        }
        let has_chance = (1..=trace.horizon_slots).any(|s| {
            let start = trace.params.slot_start(s);
            good_slot(s) && start >= tx.t && trace.roles(s).is_some_and(|r| r.is_proposer(tx.node))
        });
        if !has_chance {
            continue;
        }
        for &p in &honest {
            if !trace.final_logs[p as usize].iter().flatten().any(|id| *id == tx.id) {
                missing.push((hex::encode(tx.id), p));
            }
        }
    }
    LivenessReport {
        passed: trace.stalls.is_empty() && slot_failures.is_empty() && missing.is_empty(),
        stalls: trace.stalls.clone(),
        slot_failures,
        missing,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryReport {
    pub passed: bool,
    pub late: usize,
}

/// Every honest-to-honest message arrives by `max(sent, GST) + delta`.
pub fn check_delivery_bound(trace: &ExecutionTrace) -> DeliveryReport {
    let delta = trace.params.delta_ms;
    let late = trace
        .events
        .iter()
        .filter(|e| matches!(e.payload, TracePayload::Msg(_)))
        .filter(|e| e.from.is_some_and(|f| trace.is_honest(f)) && e.to.is_some_and(|t| trace.is_honest(t)))
        .filter(|e| e.t > e.sent.max(trace.gst_ms) + delta)
        .count();
    DeliveryReport { passed: late == 0, late }
}

/// All property verdicts for one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub safety: SafetyReport,
    pub scr: ScrReport,
    pub liveness: LivenessReport,
    pub delivery: DeliveryReport,
    pub slots_assigned: Vec<usize>,
    pub transactions_input: usize,
    pub messages: usize,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.safety.passed && self.scr.passed && self.liveness.passed && self.delivery.passed
    }

    /// Names of failed properties.
    pub fn failures(&self) -> Vec<&'static str> {
        [
            ("safety", self.safety.passed),
            ("selective-censorship resistance", self.scr.passed),
            ("liveness", self.liveness.passed),
            ("delivery bound", self.delivery.passed),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| n)
        .collect()
    }
}

pub fn check_all(trace: &ExecutionTrace) -> SimReport {
    SimReport {
        safety: check_safety(trace),
        scr: check_scr(trace),
        liveness: check_liveness(trace),
        delivery: check_delivery_bound(trace),
        slots_assigned: trace.final_logs.iter().map(|l| l.len()).collect(),
        transactions_input: trace.tx_inputs.len(),
        messages: trace.events.len(),
    }
}
