//! The consensus gadget: roles, per-slot phases and the node state machine.

pub mod node;
pub mod params;
pub mod phases;
pub mod roles;
pub mod types;

pub type NodeId = u32;

pub use node::{Action, McpNode, Message};
pub use params::{Fraction, ParamsError, ProtocolParams};
pub use phases::{
    build_packets, compute_available, finalize_slot, leader_phase, proposer_phase, reconstruct_batch, relay_phase,
    release_shreds, validate_block, verify_packet, Availability, Context, ProtocolError, Reconstruction, RelayStore,
};
pub use roles::{RoleOverride, RoleSchedule, SlotAssignment};
pub use types::{decode_batch, encode_batch, Attestation, Block, ShredPacket, Transaction, TxId};
