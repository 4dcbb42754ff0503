//! Multiple-concurrent-proposer consensus gadget: primitives, protocol
//! state machines, a deterministic simulator and the fault analysis.

pub mod ab;
pub mod analysis;
pub mod commitment;
pub mod field;
pub mod hecc;
pub mod protocol;
pub mod rng;
pub mod selftest;
pub mod sig;
pub mod sim;

pub use commitment::{vc_commit, vc_open, vc_verify, CommitError, Opening, VectorCommitment};
pub use field::{Field, FieldElement, FieldError};
pub use hecc::{Hecc, HeccError, HeccParams, ShredMatrix};
pub use sig::{keygen, sign, verify, KeyPair, PublicKey, SigTag, Signature, SigningContext};
pub use analysis::{binomial_tail, chernoff_relay_bound, fault_probabilities, FaultModel, FaultReport};
