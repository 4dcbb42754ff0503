//! Execution traces and their line-delimited export.

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::protocol::{Message, NodeId, ProtocolParams, SlotAssignment, TxId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TracePayload {
    Msg(Arc<Message>),
    /// A transaction input by the workload.
    Tx(Arc<Vec<u8>>),
    AbInput(Arc<Vec<u8>>),
    /// `None` is the empty decision.
    AbOutput(Option<Arc<Vec<u8>>>),
}

/// One delivery. `from`/`to` are `None` for the workload and the atomic
/// broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub t: u64,
    pub sent: u64,
    pub from: Option<NodeId>,
    pub to: Option<NodeId>,
    pub slot: u64,
    pub payload: TracePayload,
}

impl TraceEvent {
    pub fn kind(&self) -> &'static str {
        match &self.payload {
            TracePayload::Msg(m) => m.kind(),
            TracePayload::Tx(_) => "tx",
            TracePayload::AbInput(_) => "ab_input",
            TracePayload::AbOutput(_) => "ab_output",
        }
    }

    pub fn bytes(&self, params: &ProtocolParams) -> Vec<u8> {
        match &self.payload {
            TracePayload::Msg(m) => m.to_bytes(&params.field),
            TracePayload::Tx(b) | TracePayload::AbInput(b) => b.to_vec(),
            TracePayload::AbOutput(b) => b.as_ref().map(|b| b.to_vec()).unwrap_or_default(),
        }
    }
}

/// A slot assignment observed at a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub t: u64,
    pub node: NodeId,
    pub slot: u64,
    pub txs: Vec<TxId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxRecord {
    pub t: u64,
    pub node: NodeId,
    pub id: TxId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionRecord {
    pub t: u64,
    pub slot: u64,
    pub empty: bool,
}

/// An available batch that never gathered enough shreds at a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stall {
    pub slot: u64,
    pub node: NodeId,
    pub proposer: NodeId,
    pub flagged_at: u64,
}

#[derive(Debug, Clone)]
pub struct ExecutionTrace {
    pub params: ProtocolParams,
    pub gst_ms: u64,
    pub horizon_slots: u64,
    pub corrupted: BTreeSet<NodeId>,
    pub events: Vec<TraceEvent>,
    pub logs: Vec<LogEntry>,
    /// `final_logs[node][s - 1]` is the node's `L[s]` at the end of the run.
    pub final_logs: Vec<Vec<Vec<TxId>>>,
    /// Index `s - 1` holds slot `s`.
    pub roles: Vec<SlotAssignment>,
    pub tx_inputs: Vec<TxRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub stalls: Vec<Stall>,
}

#[derive(Serialize)]
struct Line<'a> {
    t: u64,
    sent: u64,
    kind: &'a str,
    from: Option<NodeId>,
    to: Option<NodeId>,
    slot: u64,
    bytes_hex: String,
}

impl ExecutionTrace {
    pub fn is_honest(&self, node: NodeId) -> bool {
        !self.corrupted.contains(&node)
    }

    pub fn honest_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.params.n as NodeId).filter(|&p| self.is_honest(p))
    }

    pub fn roles(&self, slot: u64) -> Option<&SlotAssignment> {
        slot.checked_sub(1).and_then(|i| self.roles.get(i as usize))
    }

    /// Everything delivered to a corrupted node, in order.
    pub fn adversary_view(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events
            .iter()
            .filter(|e| e.to.is_some_and(|to| self.corrupted.contains(&to)))
    }

    /// One JSON object per delivery.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            let line = Line {
                t: e.t,
                sent: e.sent,
                kind: e.kind(),
                from: e.from,
                to: e.to,
                slot: e.slot,
                bytes_hex: hex::encode(e.bytes(&self.params)),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }
}
