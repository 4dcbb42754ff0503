//! Ideal atomic broadcast: slot-indexed input and output with agreement,
//! in-order delivery and leader-driven liveness.
//!
//! The functionality never fabricates payloads. For each slot it outputs the
//! leader's input, or nothing when the leader gave no input or is corrupt and
//! the adversary opts for the empty decision.

use std::collections::BTreeMap;

use rand::Rng;

use crate::protocol::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbConfig {
    /// Confirmation latency after the proposal time, at most two delays.
    pub delta_ab_ms: u64,
    /// Leader-driven liveness constant: slots with `T_s >= GST + c * delta`
    /// are guaranteed.
    pub c: u64,
    pub delta_ms: u64,
    pub gst_ms: u64,
    /// Largest adversarial extra delay before GST.
    pub pre_gst_cap_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbDecision {
    pub slot: u64,
    pub payload: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputOutcome {
    Registered,
    NotLeader,
    Duplicate,
    /// The slot was already decided.
    Late,
}

/// What a corrupt leader's slot decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeaderChoice {
    #[default]
    Deliver,
    Bottom,
}

#[derive(Debug, Clone)]
pub struct IdealAb {
    config: AbConfig,
    inputs: BTreeMap<u64, (u64, Vec<u8>)>,
    decided: u64,
    last_time: u64,
    log: Vec<(u64, AbDecision)>,
}

impl IdealAb {
    pub fn new(config: AbConfig) -> Self {
        IdealAb {
            config,
            inputs: BTreeMap::new(),
            decided: 0,
            last_time: 0,
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &AbConfig {
        &self.config
    }

    /// Registers `payload` for `slot` if `node` leads it and has not input
    /// before.
    pub fn input(&mut self, node: NodeId, leader: NodeId, slot: u64, payload: Vec<u8>, now: u64) -> InputOutcome {
        if node != leader {
            return InputOutcome::NotLeader;
        }
        if slot <= self.decided {
            return InputOutcome::Late;
        }
        if self.inputs.contains_key(&slot) {
            return InputOutcome::Duplicate;
        }
        self.inputs.insert(slot, (now, payload));
        InputOutcome::Registered
    }

    /// When slot `slot` (proposal time `slot_time`) is output at every node.
    /// Never earlier than the previous slot's output, and bounded by
    /// `max(T_s, GST) + delta_ab`.
    pub fn decision_time<R: Rng + ?Sized>(&mut self, slot_time: u64, rng: &mut R) -> u64 {
        let c = &self.config;
        let base = slot_time + c.delta_ab_ms;
        let bound = slot_time.max(c.gst_ms) + c.delta_ab_ms;
        let t = if slot_time < c.gst_ms + c.c * c.delta_ms {
            (base + rng.gen_range(0..=c.pre_gst_cap_ms)).min(bound)
        } else {
            base
        };
        self.last_time = self.last_time.max(t);
        self.last_time
    }

    /// Decides the next slot. Must be called for consecutive slots.
    pub fn decide(&mut self, slot: u64, slot_time: u64, leader_honest: bool, choice: LeaderChoice, now: u64) -> AbDecision {
        assert_eq!(slot, self.decided + 1, "slots decide consecutively");
        self.decided = slot;
        let input = self.inputs.remove(&slot);
        let payload = match input {
            // an honest leader's timely input is always confirmed
            Some((at, p)) if leader_honest && at <= slot_time => Some(p),
            Some((_, p)) if !leader_honest && choice == LeaderChoice::Deliver => Some(p),
            _ => None,
        };
        let d = AbDecision { slot, payload };
        self.log.push((now, d.clone()));
        d
    }

    /// Every decision with its output time.
    pub fn decisions(&self) -> &[(u64, AbDecision)] {
        &self.log
    }
}
