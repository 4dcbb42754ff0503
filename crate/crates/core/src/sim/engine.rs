//! The discrete-event loop.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

use super::adversary::{ByzantineNode, Strategy};
use super::config::{ConfigError, SimConfig};
use super::trace::{DecisionRecord, ExecutionTrace, LogEntry, Stall, TraceEvent, TracePayload, TxRecord};
use crate::ab::{AbConfig, IdealAb, LeaderChoice};
use crate::protocol::{Action, Context, McpNode, Message, NodeId, RoleSchedule, Transaction};
use crate::rng::derive_rng;
use crate::sig::{keygen, KeyPair, VerifyCache};

/// Orders deliveries ahead of timers at equal times.
const CLASS_DELIVERY: u8 = 0;
const CLASS_TIMER: u8 = 1;
const SYSTEM: u64 = u64::MAX;

#[derive(Debug)]
enum Kind {
    Deliver { from: NodeId, to: NodeId, sent: u64, msg: Arc<Message> },
    TxArrival { node: NodeId, payload: Arc<Vec<u8>> },
    AbOutput { node: NodeId, slot: u64, payload: Option<Arc<Vec<u8>>> },
    SlotStart(u64),
    RelayTime(u64),
    LeaderTime(u64),
    AbDecide(u64),
    StallCheck(u64),
}

#[derive(Debug)]
struct Event {
    key: (u64, u8, u64, u64, u64),
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

enum Participant {
    Honest(McpNode),
    Byzantine(ByzantineNode),
}

impl Participant {
    fn node(&self) -> &McpNode {
        match self {
            Participant::Honest(n) => n,
            Participant::Byzantine(b) => b.inner(),
        }
    }

    fn node_mut(&mut self) -> &mut McpNode {
        match self {
            Participant::Honest(n) => n,
            Participant::Byzantine(b) => b.inner_mut(),
        }
    }

    fn slot_start(&mut self, s: u64) -> Vec<Action> {
        match self {
            Participant::Honest(n) => n.on_slot_start(s),
            Participant::Byzantine(b) => b.on_slot_start(s),
        }
    }

    fn relay_time(&mut self, s: u64) -> Vec<Action> {
        match self {
            Participant::Honest(n) => n.on_relay_time(s),
            Participant::Byzantine(b) => b.on_relay_time(s),
        }
    }

    fn leader_time(&mut self, s: u64) -> Vec<Action> {
        match self {
            Participant::Honest(n) => n.on_leader_time(s),
            Participant::Byzantine(b) => b.on_leader_time(s),
        }
    }

    fn message(&mut self, from: NodeId, msg: Message) -> Vec<Action> {
        match self {
            Participant::Honest(n) => n.on_message(from, msg),
            Participant::Byzantine(b) => b.on_message(from, msg),
        }
    }

    fn decision(&mut self, s: u64, payload: Option<&[u8]>) -> Vec<Action> {
        match self {
            Participant::Honest(n) => n.on_decision(s, payload),
            Participant::Byzantine(b) => b.on_decision(s, payload),
        }
    }
}

/// Deterministic signing keys for a run.
pub fn node_keys(seed: u64, n: usize) -> Vec<KeyPair> {
    (0..n)
        .map(|i| {
            let mut rng: ChaCha20Rng = derive_rng(seed, "key", i as u64);
            let mut sk = [0u8; 32];
            rng.fill_bytes(&mut sk);
            keygen(&sk)
        })
        .collect()
}

struct Simulation {
    config: SimConfig,
    ctx: Rc<Context>,
    nodes: Vec<Participant>,
    ab: IdealAb,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    net_rng: ChaCha20Rng,
    trace: ExecutionTrace,
    decision_times: Vec<u64>,
}

/// Runs one execution to completion and returns its trace.
pub fn run_execution(config: &SimConfig) -> Result<ExecutionTrace, ConfigError> {
    config.validate()?;
    let mut sim = Simulation::new(config.clone())?;
    sim.run();
    Ok(sim.finish())
}

impl Simulation {
    fn new(config: SimConfig) -> Result<Self, ConfigError> {
        let p = &config.params;
        let keys = node_keys(config.seed, p.n);
        let roles = RoleSchedule::with_overrides(p.n, p.n_prop, p.n_relay, config.seed, config.role_overrides.clone());
        let ctx = Context::with_verifier(
            p.clone(),
            keys.iter().map(|k| *k.public()).collect(),
            roles,
            Box::new(VerifyCache::new()),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let ctx = Rc::new(ctx);
        let salt_label = format!("node/{}", config.encoding_salt);
        let nodes = keys
            .into_iter()
            .enumerate()
            .map(|(i, k)| {
                let id = i as NodeId;
                let mut node = McpNode::new(id, k, ctx.clone(), derive_rng(config.seed, &salt_label, i as u64));
                node.set_split(config.splits.get(&id).copied());
                if config.is_honest(id) {
                    Participant::Honest(node)
                } else {
                    let strategies = config.strategies.get(&id).cloned().unwrap_or_else(|| vec![Strategy::Honest]);
                    Participant::Byzantine(ByzantineNode::new(node, strategies))
                }
            })
            .collect();
        let ab = IdealAb::new(AbConfig {
            delta_ab_ms: config.delta_ab_ms,
            c: config.ab_c,
            delta_ms: p.delta_ms,
            gst_ms: config.gst_ms,
            pre_gst_cap_ms: config.pre_gst_cap_periods * p.slot_period_ms,
        });
        let roles = (1..=config.horizon_slots).map(|s| (*ctx.roles().get(s)).clone()).collect();
        let trace = ExecutionTrace {
            params: p.clone(),
            gst_ms: config.gst_ms,
            horizon_slots: config.horizon_slots,
            corrupted: config.corrupted.clone(),
            events: Vec::new(),
            logs: Vec::new(),
            final_logs: Vec::new(),
            roles,
            tx_inputs: Vec::new(),
            decisions: Vec::new(),
            stalls: Vec::new(),
        };
        let mut sim = Simulation {
            net_rng: derive_rng(config.seed, "net", 0),
            config,
            ctx,
            nodes,
            ab,
            queue: BinaryHeap::new(),
            seq: 0,
            trace,
            decision_times: Vec::new(),
        };
        sim.schedule_initial();
        Ok(sim)
    }

    fn push(&mut self, time: u64, class: u8, a: u64, b: u64, kind: Kind) {
        self.seq += 1;
        self.queue.push(Reverse(Event {
            key: (time, class, a, b, self.seq),
            kind,
        }));
    }

    fn schedule_initial(&mut self) {
        let p = self.config.params.clone();
        let mut ab_rng: ChaCha20Rng = derive_rng(self.config.seed, "ab", 0);
        for tx in self.config.workload.clone() {
            self.push(
                tx.t_ms,
                CLASS_DELIVERY,
                SYSTEM,
                tx.node as u64,
                Kind::TxArrival {
                    node: tx.node,
                    payload: Arc::new(tx.payload),
                },
            );
        }
        for s in 1..=self.config.horizon_slots {
            self.push(p.slot_start(s), CLASS_TIMER, 0, s, Kind::SlotStart(s));
            self.push(p.relay_time(s), CLASS_TIMER, 1, s, Kind::RelayTime(s));
            self.push(p.slot_time(s), CLASS_TIMER, 2, s, Kind::LeaderTime(s));
            let d = self.ab.decision_time(p.slot_time(s), &mut ab_rng);
            self.decision_times.push(d);
            self.push(d, CLASS_TIMER, 3, s, Kind::AbDecide(s));
        }
    }

    fn delay(&mut self, now: u64) -> u64 {
        let p = &self.config.params;
        let delta = p.delta_ms;
        let gst = self.config.gst_ms;
        if now >= gst {
            self.net_rng.gen_range(1..=delta)
        } else {
            let cap = (self.config.pre_gst_cap_periods * p.slot_period_ms).max(1);
            self.net_rng.gen_range(1..=cap).min(gst + delta - now)
        }
    }

    fn send(&mut self, now: u64, from: NodeId, to: NodeId, msg: Arc<Message>) {
        let delay = if from == to { 0 } else { self.delay(now) };
        self.push(
            now + delay,
            CLASS_DELIVERY,
            from as u64,
            to as u64,
            Kind::Deliver { from, to, sent: now, msg },
        );
    }

    fn apply(&mut self, now: u64, node: NodeId, actions: Vec<Action>) {
        for a in actions {
            match a {
                Action::Send { to, msg } => self.send(now, node, to, Arc::new(msg)),
                Action::Broadcast { msg } => {
                    let msg = Arc::new(msg);
                    for to in 0..self.config.params.n as NodeId {
                        self.send(now, node, to, msg.clone());
                    }
                }
                Action::AbInput { slot, payload } => {
                    let leader = self.ctx.roles().get(slot).leader;
                    self.ab.input(node, leader, slot, payload.clone(), now);
                    self.trace.events.push(TraceEvent {
                        t: now,
                        sent: now,
                        from: Some(node),
                        to: None,
                        slot,
                        payload: TracePayload::AbInput(Arc::new(payload)),
                    });
                }
            }
        }
    }

    /// Runs `f` on a node, applies its actions and records log growth.
    fn with_node(&mut self, now: u64, id: NodeId, f: impl FnOnce(&mut Participant) -> Vec<Action>) {
        let before = self.nodes[id as usize].node().log().len();
        let actions = f(&mut self.nodes[id as usize]);
        let log = self.nodes[id as usize].node().log();
        for (i, entry) in log.iter().enumerate().skip(before) {
            self.trace.logs.push(LogEntry {
                t: now,
                node: id,
                slot: i as u64 + 1,
                txs: entry.iter().map(|tx| *tx.id()).collect(),
            });
        }
        self.apply(now, id, actions);
    }

    fn run(&mut self) {
        let n = self.config.params.n as NodeId;
        while let Some(Reverse(ev)) = self.queue.pop() {
            let now = ev.key.0;
            match ev.kind {
                Kind::Deliver { from, to, sent, msg } => {
                    self.trace.events.push(TraceEvent {
                        t: now,
                        sent,
                        from: Some(from),
                        to: Some(to),
                        slot: msg.slot(),
                        payload: TracePayload::Msg(msg.clone()),
                    });
                    let msg = Arc::unwrap_or_clone(msg);
                    self.with_node(now, to, |p| p.message(from, msg));
                }
                Kind::TxArrival { node, payload } => {
                    let tx = Transaction::new(payload.to_vec());
                    self.trace.tx_inputs.push(TxRecord {
                        t: now,
                        node,
                        id: *tx.id(),
                    });
                    self.trace.events.push(TraceEvent {
                        t: now,
                        sent: now,
                        from: None,
                        to: Some(node),
                        slot: 0,
                        payload: TracePayload::Tx(payload),
                    });
                    self.nodes[node as usize].node_mut().submit(tx);
                }
                Kind::AbOutput { node, slot, payload } => {
                    self.trace.events.push(TraceEvent {
                        t: now,
                        sent: now,
                        from: None,
                        to: Some(node),
                        slot,
                        payload: TracePayload::AbOutput(payload.clone()),
                    });
                    self.with_node(now, node, |p| p.decision(slot, payload.as_deref().map(|v| &v[..])));
                }
                Kind::SlotStart(s) => {
                    for id in 0..n {
                        self.with_node(now, id, |p| p.slot_start(s));
                    }
                }
                Kind::RelayTime(s) => {
                    for id in 0..n {
                        self.with_node(now, id, |p| p.relay_time(s));
                    }
                }
                Kind::LeaderTime(s) => {
                    let leader = self.ctx.roles().get(s).leader;
                    self.with_node(now, leader, |p| p.leader_time(s));
                }
                Kind::AbDecide(s) => self.decide(now, s),
                Kind::StallCheck(s) => {
                    for id in 0..n {
                        if !self.config.is_honest(id) {
                            continue;
                        }
                        for (slot, proposer) in self.nodes[id as usize].node().missing_batches() {
                            if slot == s {
                                self.trace.stalls.push(Stall {
                                    slot,
                                    node: id,
                                    proposer,
                                    flagged_at: now,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    fn decide(&mut self, now: u64, s: u64) {
        let p = self.config.params.clone();
        let leader = self.ctx.roles().get(s).leader;
        let honest = self.config.is_honest(leader);
        let choice = if honest {
            LeaderChoice::Deliver
        } else {
            let silent = self
                .config
                .strategies
                .get(&leader)
                .is_some_and(|st| st.contains(&Strategy::LeaderSilent));
            if silent {
                LeaderChoice::Bottom
            } else {
                LeaderChoice::Deliver
            }
        };
        let d = self.ab.decide(s, p.slot_time(s), honest, choice, now);
        self.trace.decisions.push(DecisionRecord {
            t: now,
            slot: s,
            empty: d.payload.is_none(),
        });
        let payload = d.payload.map(Arc::new);
        for id in 0..p.n as NodeId {
            self.push(
                now,
                CLASS_DELIVERY,
                SYSTEM - 1,
                id as u64,
                Kind::AbOutput {
                    node: id,
                    slot: s,
                    payload: payload.clone(),
                },
            );
        }
        let check_at = now + self.config.stall_periods * p.slot_period_ms;
        self.push(check_at, CLASS_TIMER, 4, s, Kind::StallCheck(s));
    }

    fn finish(mut self) -> ExecutionTrace {
        self.trace.final_logs = self
            .nodes
            .iter()
            .map(|p| {
                p.node()
                    .log()
                    .iter()
                    .map(|entry| entry.iter().map(|tx| *tx.id()).collect())
                    .collect()
            })
            .collect();
        self.trace
    }
}
