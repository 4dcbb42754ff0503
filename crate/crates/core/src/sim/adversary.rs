//! Corrupted-node behaviors. A corrupted node runs the honest state machine
//! and its strategies rewrite or suppress what it sends.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::phases::{build_packets, collect_attestations, random_masks};
use crate::protocol::types::encode_batch;
use crate::protocol::{Action, Attestation, Block, McpNode, Message, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Strategy {
    /// Follows the protocol; the adversary only observes.
    Honest,
    /// Sends nothing at all.
    Crash,
    /// As relay, never releases shreds of these proposers (all if empty).
    WithholdShreds {
        #[serde(default)]
        targets: Vec<NodeId>,
    },
    /// As relay, leaves these proposers out of its attestation.
    WithholdAttestations { targets: Vec<NodeId> },
    /// As proposer, sends one encoding to the relay indices in `first`, a
    /// second independent encoding to those in `second`, and nothing to the
    /// rest.
    EquivocateCommitment {
        first: Vec<usize>,
        #[serde(default)]
        second: Vec<usize>,
    },
    /// As proposer, commits to a shred vector that is not a codeword.
    BadEncoding,
    /// As leader, drops as many attestations naming `target` as validity
    /// allows.
    LeaderCensor { target: NodeId },
    /// As leader, inputs nothing.
    LeaderSilent,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Honest => "honest",
            Strategy::Crash => "crash",
            Strategy::WithholdShreds { .. } => "withhold_shreds",
            Strategy::WithholdAttestations { .. } => "withhold_attestations",
            Strategy::EquivocateCommitment { .. } => "equivocate_commitment",
            Strategy::BadEncoding => "bad_encoding",
            Strategy::LeaderCensor { .. } => "leader_censor",
            Strategy::LeaderSilent => "leader_silent",
        }
    }
}

/// A corrupted node.
#[derive(Debug)]
pub struct ByzantineNode {
    inner: McpNode,
    strategies: Vec<Strategy>,
}

impl ByzantineNode {
    pub fn new(inner: McpNode, strategies: Vec<Strategy>) -> Self {
        ByzantineNode { inner, strategies }
    }

    pub fn inner(&self) -> &McpNode {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut McpNode {
        &mut self.inner
    }

    fn crashed(&self) -> bool {
        self.strategies.contains(&Strategy::Crash)
    }

    pub fn on_slot_start(&mut self, slot: u64) -> Vec<Action> {
        if self.crashed() {
            return Vec::new();
        }
        let roles = self.inner.ctx().roles().get(slot);
        if !roles.is_proposer(self.inner.id()) {
            return Vec::new();
        }
        for s in self.strategies.clone() {
            match s {
                Strategy::EquivocateCommitment { first, second } => {
                    let a = self.encode(slot, false);
                    let b = self.encode(slot, false);
                    let mut out = Vec::new();
                    for (indices, packets) in [(first, a), (second, b)] {
                        for i in indices {
                            if let (Some(p), Some(to)) = (packets.get(i.wrapping_sub(1)), roles.relay_at(i)) {
                                out.push(Action::Send {
                                    to,
                                    msg: Message::Shred(p.clone()),
                                });
                            }
                        }
                    }
                    return out;
                }
                Strategy::BadEncoding => {
                    return self
                        .encode(slot, true)
                        .into_iter()
                        .map(|p| Action::Send {
                            to: roles.relays[p.index - 1],
                            msg: Message::Shred(p),
                        })
                        .collect();
                }
                _ => {}
            }
        }
        self.inner.on_slot_start(slot)
    }

    /// Packets for the node's current batch; `corrupt` breaks the codeword
    /// in the last column before committing.
    fn encode(&mut self, slot: u64, corrupt: bool) -> Vec<crate::protocol::ShredPacket> {
        let ctx = self.inner.ctx().clone();
        let batch = encode_batch(&self.inner.current_batch());
        let hecc = ctx.hecc();
        let rows = hecc.rows_for(batch.len(), ctx.params().k()).min(ctx.params().max_rows);
        let Ok(enc) = hecc.encode_bytes(rows, &batch, self.inner.rng()) else {
            return Vec::new();
        };
        let mut columns = enc.shreds.columns();
        if corrupt {
            let f = hecc.field();
            let last = columns.last_mut().expect("at least one relay");
            last[0] = f.add(last[0], f.one());
        }
        let masks = random_masks(&ctx, self.inner.rng());
        let keys = self.inner.keys().clone();
        build_packets(&ctx, &keys, self.inner.id(), slot, columns, masks).unwrap_or_default()
    }

    pub fn on_relay_time(&mut self, slot: u64) -> Vec<Action> {
        if self.crashed() {
            return Vec::new();
        }
        let mut actions = self.inner.on_relay_time(slot);
        let targets: Vec<NodeId> = self
            .strategies
            .iter()
            .filter_map(|s| match s {
                Strategy::WithholdAttestations { targets } => Some(targets.clone()),
                _ => None,
            })
            .flatten()
            .collect();
        if targets.is_empty() {
            return actions;
        }
        for a in &mut actions {
            if let Action::Send {
                msg: Message::Attest(att),
                ..
            } = a
            {
                let entries = att
                    .entries
                    .iter()
                    .filter(|(q, _)| !targets.contains(q))
                    .map(|(&q, e)| (q, *e))
                    .collect();
                *att = Attestation::create(self.inner.keys(), att.relay, att.slot, entries);
            }
        }
        actions
    }

    pub fn on_leader_time(&mut self, slot: u64) -> Vec<Action> {
        if self.crashed() || self.strategies.contains(&Strategy::LeaderSilent) {
            return Vec::new();
        }
        let target = self.strategies.iter().find_map(|s| match s {
            Strategy::LeaderCensor { target } => Some(*target),
            _ => None,
        });
        let Some(target) = target else {
            return self.inner.on_leader_time(slot);
        };
        let ctx = self.inner.ctx().clone();
        if ctx.roles().get(slot).leader != self.inner.id() {
            return Vec::new();
        }
        let atts = self.inner.take_attestations(slot);
        let valid = collect_attestations(&ctx, slot, &atts);
        let (naming, rest): (BTreeMap<NodeId, Attestation>, BTreeMap<NodeId, Attestation>) =
            valid.into_iter().partition(|(_, a)| a.entries.contains_key(&target));
        let keep_naming = ctx.params().thr_relay().saturating_sub(rest.len());
        let mut entries = rest;
        entries.extend(naming.into_iter().take(keep_naming));
        let block = Block::create(self.inner.keys(), self.inner.id(), slot, entries);
        vec![Action::AbInput {
            slot,
            payload: block.to_bytes(),
        }]
    }

    pub fn on_message(&mut self, from: NodeId, msg: Message) -> Vec<Action> {
        if self.crashed() {
            return Vec::new();
        }
        self.inner.on_message(from, msg)
    }

    pub fn on_decision(&mut self, slot: u64, payload: Option<&[u8]>) -> Vec<Action> {
        let actions = self.inner.on_decision(slot, payload);
        if self.crashed() {
            return Vec::new();
        }
        let withheld: Option<Vec<NodeId>> = self
            .strategies
            .iter()
            .filter_map(|s| match s {
                Strategy::WithholdShreds { targets } => Some(targets.clone()),
                _ => None,
            })
            .reduce(|mut a, b| {
                a.extend(b);
                a
            });
        let Some(withheld) = withheld else {
            return actions;
        };
        actions
            .into_iter()
            .filter(|a| match a {
                Action::Broadcast {
                    msg: Message::Release(p),
                } => !(withheld.is_empty() || withheld.contains(&p.proposer)),
                _ => true,
            })
            .collect()
    }
}
