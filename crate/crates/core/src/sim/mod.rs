//! Deterministic discrete-event simulation of the protocol under a static
//! adversary, with checkers for the consensus properties.

pub mod adversary;
pub mod checks;
pub mod config;
pub mod engine;
pub mod hiding;
pub mod trace;
pub mod wop;

pub use adversary::{ByzantineNode, Strategy};
pub use checks::{check_all, check_delivery_bound, check_liveness, check_safety, check_scr, final_log, SimReport};
pub use config::{generate_workload, ConfigError, SimConfig, TxInput};
pub use engine::{node_keys, run_execution};
pub use trace::{ExecutionTrace, Stall, TraceEvent, TracePayload};
