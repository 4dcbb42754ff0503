//! The honest node as an event-driven state machine.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::rc::Rc;

use rand_chacha::ChaCha20Rng;

use super::phases::{
    finalize_slot, leader_phase, proposer_phase, reconstruct_batch, relay_phase, release_shreds, select_batch, verify_packet,
    Availability, Context, Reconstruction, RelayStore,
};
use super::types::{Attestation, Block, ShredPacket, Transaction, TxId};
use super::NodeId;
use crate::field::Field;
use crate::sig::KeyPair;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// Proposer to relay.
    Shred(ShredPacket),
    /// Relay to leader.
    Attest(Attestation),
    /// Relay to everyone, after the slot is decided.
    Release(ShredPacket),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Shred(_) => "shred",
            Message::Attest(_) => "attest",
            Message::Release(_) => "release",
        }
    }

    pub fn slot(&self) -> u64 {
        match self {
            Message::Shred(p) | Message::Release(p) => p.slot,
            Message::Attest(a) => a.slot,
        }
    }

    pub fn to_bytes(&self, field: &Field) -> Vec<u8> {
        match self {
            Message::Shred(p) | Message::Release(p) => p.to_bytes(field),
            Message::Attest(a) => a.to_bytes(),
        }
    }
}

/// Side effects requested by a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Send { to: NodeId, msg: Message },
    /// To every node, including the sender.
    Broadcast { msg: Message },
    /// Input to the atomic broadcast for a slot.
    AbInput { slot: u64, payload: Vec<u8> },
}

#[derive(Debug, Clone)]
enum Decision {
    Empty,
    Available(Rc<Availability>),
}

#[derive(Debug, Default)]
struct SlotProgress {
    decision: Option<Decision>,
    /// Released packets that arrived before the decision.
    early: Vec<ShredPacket>,
    /// Verified packets per available proposer, distinct indices, in
    /// arrival order.
    valid: BTreeMap<NodeId, Vec<ShredPacket>>,
    results: BTreeMap<NodeId, Option<Vec<Transaction>>>,
}

/// One honest participant.
pub struct McpNode {
    id: NodeId,
    keys: KeyPair,
    ctx: Rc<Context>,
    rng: ChaCha20Rng,
    split: Option<(usize, usize)>,
    pending: BTreeMap<TxId, Transaction>,
    confirmed: HashSet<TxId>,
    log: Vec<Vec<Transaction>>,
    store: RelayStore,
    relay_inbox: BTreeMap<u64, Vec<ShredPacket>>,
    leader_inbox: BTreeMap<u64, Vec<Attestation>>,
    closed_relay: BTreeSet<u64>,
    closed_leader: BTreeSet<u64>,
    slots: BTreeMap<u64, SlotProgress>,
    last_decided: u64,
}

impl std::fmt::Debug for McpNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("McpNode")
            .field("id", &self.id)
            .field("log_len", &self.log.len())
            .finish_non_exhaustive()
    }
}

impl McpNode {
    pub fn new(id: NodeId, keys: KeyPair, ctx: Rc<Context>, rng: ChaCha20Rng) -> Self {
        McpNode {
            id,
            keys,
            ctx,
            rng,
            split: None,
            pending: BTreeMap::new(),
            confirmed: HashSet::new(),
            log: Vec::new(),
            store: RelayStore::new(),
            relay_inbox: BTreeMap::new(),
            leader_inbox: BTreeMap::new(),
            closed_relay: BTreeSet::new(),
            closed_leader: BTreeSet::new(),
            slots: BTreeMap::new(),
            last_decided: 0,
        }
    }

    /// Dedicates `t_extra - T` payload coefficients to extra randomness.
    pub fn set_split(&mut self, split: Option<(usize, usize)>) {
        self.split = split;
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn ctx(&self) -> &Rc<Context> {
        &self.ctx
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// Assigned slots: `log()[s - 1]` is `L[s]`.
    pub fn log(&self) -> &[Vec<Transaction>] {
        &self.log
    }

    pub fn is_confirmed(&self, id: &TxId) -> bool {
        self.confirmed.contains(id)
    }

    pub fn submit(&mut self, tx: Transaction) {
        if !self.confirmed.contains(tx.id()) {
            self.pending.insert(*tx.id(), tx);
        }
    }

    /// The batch this node would propose now.
    pub fn current_batch(&self) -> Vec<Transaction> {
        let k_payload = self.split.map_or(self.ctx.params().k(), |s| s.0);
        let pending: Vec<Transaction> = self.pending.values().cloned().collect();
        select_batch(&self.ctx, &pending, k_payload)
    }

    /// Proposer phase, at the slot start.
    pub fn on_slot_start(&mut self, slot: u64) -> Vec<Action> {
        let roles = self.ctx.roles().get(slot);
        if !roles.is_proposer(self.id) {
            return Vec::new();
        }
        let batch = self.current_batch();
        let ctx = self.ctx.clone();
        match proposer_phase(&ctx, &self.keys, self.id, slot, &batch, self.split, &mut self.rng) {
            Ok(packets) => packets
                .into_iter()
                .map(|p| Action::Send {
                    to: roles.relays[p.index - 1],
                    msg: Message::Shred(p),
                })
                .collect(),
            Err(_) => Vec::new(),
        }
    }

    /// Relay phase, one delay before the slot's proposal time.
    pub fn on_relay_time(&mut self, slot: u64) -> Vec<Action> {
        let roles = self.ctx.roles().get(slot);
        if roles.relay_index(self.id).is_none() {
            return Vec::new();
        }
        self.closed_relay.insert(slot);
        let packets = self.relay_inbox.remove(&slot).unwrap_or_default();
        let ctx = self.ctx.clone();
        match relay_phase(&ctx, &self.keys, self.id, slot, &packets, &mut self.store) {
            Ok(att) => vec![Action::Send {
                to: roles.leader,
                msg: Message::Attest(att),
            }],
            Err(_) => Vec::new(),
        }
    }

    /// Leader phase at the proposal time; the block goes to the broadcast.
    pub fn on_leader_time(&mut self, slot: u64) -> Vec<Action> {
        if self.ctx.roles().get(slot).leader != self.id {
            return Vec::new();
        }
        self.closed_leader.insert(slot);
        let atts = self.leader_inbox.remove(&slot).unwrap_or_default();
        match leader_phase(&self.ctx, &self.keys, self.id, slot, &atts) {
            Ok(block) => vec![Action::AbInput {
                slot,
                payload: block.to_bytes(),
            }],
            Err(_) => Vec::new(),
        }
    }

    /// Removes and returns the attestations received for `slot`, closing
    /// the leader inbox.
    pub fn take_attestations(&mut self, slot: u64) -> Vec<Attestation> {
        self.closed_leader.insert(slot);
        self.leader_inbox.remove(&slot).unwrap_or_default()
    }

    pub fn on_message(&mut self, _from: NodeId, msg: Message) -> Vec<Action> {
        match msg {
            Message::Shred(p) => {
                if !self.closed_relay.contains(&p.slot) && p.slot > self.last_decided {
                    self.relay_inbox.entry(p.slot).or_default().push(p);
                }
                Vec::new()
            }
            Message::Attest(a) => {
                if !self.closed_leader.contains(&a.slot) && a.slot > self.last_decided {
                    self.leader_inbox.entry(a.slot).or_default().push(a);
                }
                Vec::new()
            }
            Message::Release(p) => {
                let slot = p.slot;
                if slot <= self.log.len() as u64 {
                    return Vec::new();
                }
                let progress = self.slots.entry(slot).or_default();
                if progress.decision.is_none() {
                    progress.early.push(p);
                    return Vec::new();
                }
                self.accept_release(slot, p);
                self.advance();
                Vec::new()
            }
        }
    }

    /// Atomic-broadcast output for `slot`; `None` is the empty decision.
    pub fn on_decision(&mut self, slot: u64, payload: Option<&[u8]>) -> Vec<Action> {
        debug_assert!(slot > self.last_decided, "decisions arrive in slot order");
        self.last_decided = slot;
        self.relay_inbox.retain(|&s, _| s > slot);
        self.leader_inbox.retain(|&s, _| s > slot);
        let available = payload
            .and_then(Block::from_bytes)
            .and_then(|b| self.ctx.evaluate_block(&b, slot));
        let mut actions = Vec::new();
        let progress = self.slots.entry(slot).or_default();
        match available {
            None => progress.decision = Some(Decision::Empty),
            Some(avail) => {
                progress.decision = Some(Decision::Available(avail.clone()));
                if self.ctx.roles().get(slot).relay_index(self.id).is_some() {
                    actions.extend(
                        release_shreds(&self.store, slot, &avail)
                            .into_iter()
                            .map(|p| Action::Broadcast { msg: Message::Release(p) }),
                    );
                }
                let early = std::mem::take(&mut progress.early);
                for p in early {
                    self.accept_release(slot, p);
                }
            }
        }
        self.store.prune_below(slot);
        self.advance();
        actions
    }

    fn accept_release(&mut self, slot: u64, p: ShredPacket) {
        let progress = self.slots.get_mut(&slot).expect("slot tracked");
        let Some(Decision::Available(avail)) = &progress.decision else {
            return;
        };
        let q = p.proposer;
        if progress.results.contains_key(&q) || avail.get(&q) != Some(&p.commitment) {
            return;
        }
        let valid = progress.valid.entry(q).or_default();
        if valid.iter().any(|v| v.index == p.index) || !verify_packet(&self.ctx, slot, p.index, &p) {
            return;
        }
        valid.push(p);
        if valid.len() >= self.ctx.params().thr_reconstruct() {
            let c = avail[&q];
            match reconstruct_batch(&self.ctx, slot, q, &c, valid) {
                Reconstruction::Pending => {}
                Reconstruction::Invalid => {
                    progress.results.insert(q, None);
                }
                Reconstruction::Batch(b) => {
                    progress.results.insert(q, Some(b));
                }
            }
            progress.valid.remove(&q);
        }
    }

    /// Assigns every slot that is complete, strictly in order.
    fn advance(&mut self) {
        loop {
            let next = self.log.len() as u64 + 1;
            let Some(progress) = self.slots.get(&next) else {
                return;
            };
            let entry = match &progress.decision {
                None => return,
                Some(Decision::Empty) => Vec::new(),
                Some(Decision::Available(avail)) => {
                    if avail.keys().any(|q| !progress.results.contains_key(q)) {
                        return;
                    }
                    finalize_slot(&progress.results, &self.confirmed)
                }
            };
            for tx in &entry {
                self.confirmed.insert(*tx.id());
                self.pending.remove(tx.id());
            }
            self.log.push(entry);
            self.slots.remove(&next);
        }
    }

    /// Available proposers of decided but unassigned slots whose batch is
    /// still missing shreds.
    pub fn missing_batches(&self) -> Vec<(u64, NodeId)> {
        let mut out = Vec::new();
        for (&s, progress) in &self.slots {
            if let Some(Decision::Available(avail)) = &progress.decision {
                out.extend(avail.keys().filter(|q| !progress.results.contains_key(q)).map(|&q| (s, q)));
            }
        }
        out
    }

    /// Whether the slot has been decided at this node.
    pub fn decided(&self, slot: u64) -> bool {
        slot <= self.last_decided
    }
}
