//! The per-slot protocol steps as pure functions of their inputs.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use rand::Rng;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use super::params::{ParamsError, ProtocolParams};
use super::roles::RoleSchedule;
use super::types::{
    decode_batch, encode_batch, sign_commitment, verify_commitment, Attestation, Block, ShredPacket, Transaction,
    TxId,
};
use super::NodeId;
use crate::commitment::{vc_verify, CommitError, CommitmentTree, VectorCommitment};
use crate::field::FieldElement;
use crate::hecc::{unpack, Hecc, HeccError, HeccParams};
use crate::sig::{DirectVerifier, KeyPair, PublicKey, SigVerifier};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Hecc(#[from] HeccError),
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error("node {node} has no {role} role in slot {slot}")]
    NotInRole { node: NodeId, role: &'static str, slot: u64 },
    #[error("batch of {len} bytes needs {rows} rows, more than the limit of {max}")]
    BatchTooLarge { len: usize, rows: usize, max: usize },
    #[error("expected {expected} public keys, got {got}")]
    KeyCount { expected: usize, got: usize },
}

/// Availability per `(slot, block hash)`; `None` for invalid blocks.
type BlockMemo = HashMap<(u64, [u8; 32]), Option<Rc<Availability>>>;

/// Shared, read-only view of the deployment used by every phase function:
/// parameters, the code instance, public keys and roles. Also holds a
/// memo of block evaluations, which are pure functions of the block bytes.
pub struct Context {
    params: ProtocolParams,
    hecc: Hecc,
    keys: Vec<PublicKey>,
    roles: RoleSchedule,
    verifier: Box<dyn SigVerifier>,
    block_memo: RefCell<BlockMemo>,
}

impl std::fmt::Debug for Context {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Context").field("params", &self.params).finish_non_exhaustive()
    }
}

/// Proposers deemed available by a block, with their commitments.
pub type Availability = BTreeMap<NodeId, VectorCommitment>;

impl Context {
    pub fn new(params: ProtocolParams, keys: Vec<PublicKey>, roles: RoleSchedule) -> Result<Self, ProtocolError> {
        Self::with_verifier(params, keys, roles, Box::new(DirectVerifier))
    }

    pub fn with_verifier(
        params: ProtocolParams,
        keys: Vec<PublicKey>,
        roles: RoleSchedule,
        verifier: Box<dyn SigVerifier>,
    ) -> Result<Self, ProtocolError> {
        params.validate()?;
        if keys.len() != params.n {
            return Err(ProtocolError::KeyCount {
                expected: params.n,
                got: keys.len(),
            });
        }
        let hecc = Hecc::new(params.field, HeccParams::new(params.n_relay, params.k(), params.t()))?;
        Ok(Context {
            params,
            hecc,
            keys,
            roles,
            verifier,
            block_memo: RefCell::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn hecc(&self) -> &Hecc {
        &self.hecc
    }

    pub fn roles(&self) -> &RoleSchedule {
        &self.roles
    }

    pub fn verifier(&self) -> &dyn SigVerifier {
        self.verifier.as_ref()
    }

    pub fn key(&self, node: NodeId) -> Option<&PublicKey> {
        self.keys.get(node as usize)
    }

    /// Validates a block and computes its availability set, memoized by
    /// `(slot, H(bytes))`. `None` means the block is rejected.
    pub fn evaluate_block(&self, block: &Block, slot: u64) -> Option<Rc<Availability>> {
        let key = (slot, Sha256::digest(block.to_bytes()).into());
        if let Some(hit) = self.block_memo.borrow().get(&key) {
            return hit.clone();
        }
        let out = validate_block(self, block, slot).then(|| Rc::new(compute_available(self, block)));
        self.block_memo.borrow_mut().insert(key, out.clone());
        out
    }
}

/// The largest id-ordered prefix of `pending` whose batch fits in one
/// encoding with `k_payload` payload coefficients per row.
pub fn select_batch(ctx: &Context, pending: &[Transaction], k_payload: usize) -> Vec<Transaction> {
    let mut sorted: Vec<&Transaction> = pending.iter().collect();
    sorted.sort_by(|a, b| a.id().cmp(b.id()));
    let capacity = ctx.hecc.capacity(ctx.params.max_rows, k_payload);
    let mut used = 0;
    let mut out = Vec::new();
    for tx in sorted {
        let need = 4 + tx.payload().len();
        if used + need > capacity {
            break;
        }
        used += need;
        out.push(tx.clone());
    }
    out
}

/// Encodes and commits a batch, producing one signed packet per relay index.
/// `split` optionally trades payload coefficients for extra randomness.
pub fn proposer_phase<R: Rng + ?Sized>(
    ctx: &Context,
    keys: &KeyPair,
    proposer: NodeId,
    slot: u64,
    pending: &[Transaction],
    split: Option<(usize, usize)>,
    rng: &mut R,
) -> Result<Vec<ShredPacket>, ProtocolError> {
    if !ctx.roles.get(slot).is_proposer(proposer) {
        return Err(ProtocolError::NotInRole {
            node: proposer,
            role: "proposer",
            slot,
        });
    }
    let p = &ctx.params;
    let (k_payload, t_extra) = split.unwrap_or((p.k(), p.t()));
    let batch = encode_batch(pending);
    let rows = ctx.hecc.rows_for(batch.len(), k_payload);
    if rows > p.max_rows {
        return Err(ProtocolError::BatchTooLarge {
            len: batch.len(),
            rows,
            max: p.max_rows,
        });
    }
    let encoded = ctx.hecc.encode_bytes_split(k_payload, t_extra, rows, &batch, rng)?;
    let masks = random_masks(ctx, rng);
    build_packets(ctx, keys, proposer, slot, encoded.shreds.columns(), masks)
}

/// Commitment randomness: a fresh HECC codeword, so any `T` relays learn
/// nothing about it and any `K + T` can rebuild the whole vector.
pub fn random_masks<R: Rng + ?Sized>(ctx: &Context, rng: &mut R) -> Vec<FieldElement> {
    let f = ctx.hecc.field();
    let m = f.random_vec(rng, ctx.params.k());
    let r = f.random_vec(rng, ctx.params.t());
    ctx.hecc.encode(&m, &r).expect("lengths match the code")
}

/// Commits to arbitrary shred columns and masks and signs the commitment.
/// Honest proposers pass a codeword; adversaries may not.
pub fn build_packets(
    ctx: &Context,
    keys: &KeyPair,
    proposer: NodeId,
    slot: u64,
    columns: Vec<Vec<FieldElement>>,
    masks: Vec<FieldElement>,
) -> Result<Vec<ShredPacket>, ProtocolError> {
    let tree = CommitmentTree::build(&ctx.params.field, &columns, &masks)?;
    let commitment = tree.commitment();
    let signature = sign_commitment(keys, slot, &commitment);
    (1..=columns.len())
        .map(|index| {
            let o = tree.open(index)?;
            Ok(ShredPacket {
                slot,
                proposer,
                index,
                commitment,
                shred: o.value,
                mask: o.randomness,
                witness: o.witness,
                signature,
            })
        })
        .collect()
}

/// Checks a packet's signature and opening against its own commitment at
/// the given relay index.
pub fn verify_packet(ctx: &Context, slot: u64, index: usize, packet: &ShredPacket) -> bool {
    let p = &ctx.params;
    if packet.slot != slot || packet.index != index || packet.commitment.len() != p.n_relay {
        return false;
    }
    if packet.shred.is_empty() || packet.shred.len() > p.max_rows {
        return false;
    }
    if !ctx.roles.get(slot).is_proposer(packet.proposer) {
        return false;
    }
    let Some(pk) = ctx.key(packet.proposer) else {
        return false;
    };
    verify_commitment(ctx.verifier(), pk, slot, &packet.commitment, &packet.signature)
        && vc_verify(
            &p.field,
            &packet.commitment,
            index,
            &packet.shred,
            packet.mask,
            &packet.witness,
        )
}

/// Shred packets a relay has verified, written once per `(slot, proposer)`.
#[derive(Debug, Default, Clone)]
pub struct RelayStore {
    entries: BTreeMap<(u64, NodeId), ShredPacket>,
}

impl RelayStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores the packet unless an entry already exists; returns whether it
    /// was stored.
    pub fn insert(&mut self, packet: ShredPacket) -> bool {
        let key = (packet.slot, packet.proposer);
        if self.entries.contains_key(&key) {
            return false;
        }
        self.entries.insert(key, packet);
        true
    }

    pub fn get(&self, slot: u64, proposer: NodeId) -> Option<&ShredPacket> {
        self.entries.get(&(slot, proposer))
    }

    pub fn slot(&self, slot: u64) -> impl Iterator<Item = &ShredPacket> {
        self.entries.range((slot, 0)..=(slot, NodeId::MAX)).map(|(_, p)| p)
    }

    /// Drops every slot below `slot`.
    pub fn prune_below(&mut self, slot: u64) {
        self.entries = self.entries.split_off(&(slot, 0));
    }
}

/// Verifies received packets, stores the good ones and attests to every
/// stored proposer of the slot.
pub fn relay_phase(
    ctx: &Context,
    keys: &KeyPair,
    relay: NodeId,
    slot: u64,
    packets: &[ShredPacket],
    store: &mut RelayStore,
) -> Result<Attestation, ProtocolError> {
    let index = ctx.roles.get(slot).relay_index(relay).ok_or(ProtocolError::NotInRole {
        node: relay,
        role: "relay",
        slot,
    })?;
    for packet in packets {
        if store.get(slot, packet.proposer).is_none() && verify_packet(ctx, slot, index, packet) {
            store.insert(packet.clone());
        }
    }
    let entries = store
        .slot(slot)
        .map(|p| (p.proposer, (p.commitment, p.signature)))
        .collect();
    Ok(Attestation::create(keys, relay, slot, entries))
}

/// Whether an attestation is well signed by a relay of the slot, including
/// every proposer signature inside it.
pub fn attestation_is_valid(ctx: &Context, slot: u64, att: &Attestation) -> bool {
    if att.slot != slot || ctx.roles.get(slot).relay_index(att.relay).is_none() {
        return false;
    }
    let Some(pk) = ctx.key(att.relay) else {
        return false;
    };
    if !att.verify_signature(ctx.verifier(), pk) {
        return false;
    }
    att.entries.iter().all(|(&q, (c, sig))| {
        ctx.key(q)
            .is_some_and(|pk| verify_commitment(ctx.verifier(), pk, slot, c, sig))
    })
}

/// Aggregates every valid attestation (first per relay) into a signed block.
pub fn leader_phase(
    ctx: &Context,
    keys: &KeyPair,
    leader: NodeId,
    slot: u64,
    attestations: &[Attestation],
) -> Result<Block, ProtocolError> {
    if ctx.roles.get(slot).leader != leader {
        return Err(ProtocolError::NotInRole {
            node: leader,
            role: "leader",
            slot,
        });
    }
    Ok(Block::create(keys, leader, slot, collect_attestations(ctx, slot, attestations)))
}

pub fn collect_attestations(ctx: &Context, slot: u64, attestations: &[Attestation]) -> BTreeMap<NodeId, Attestation> {
    let mut entries = BTreeMap::new();
    for att in attestations {
        if !entries.contains_key(&att.relay) && attestation_is_valid(ctx, slot, att) {
            entries.insert(att.relay, att.clone());
        }
    }
    entries
}

/// Total block check performed identically by every node.
pub fn validate_block(ctx: &Context, block: &Block, slot: u64) -> bool {
    let roles = ctx.roles.get(slot);
    if block.slot != slot || block.leader != roles.leader {
        return false;
    }
    let Some(pk) = ctx.key(block.leader) else {
        return false;
    };
    if !block.verify_signature(ctx.verifier(), pk) || block.entries.len() < ctx.params.thr_relay() {
        return false;
    }
    block
        .entries
        .iter()
        .all(|(&relay, att)| att.relay == relay && attestation_is_valid(ctx, slot, att))
}

/// Proposers with a single attested commitment carrying at least
/// `thr_avail` attestations.
pub fn compute_available(ctx: &Context, block: &Block) -> Availability {
    let roles = ctx.roles.get(block.slot);
    let mut seen: BTreeMap<NodeId, BTreeMap<VectorCommitment, usize>> = BTreeMap::new();
    for att in block.entries.values() {
        for (&q, (c, _)) in &att.entries {
            *seen.entry(q).or_default().entry(*c).or_default() += 1;
        }
    }
    seen.into_iter()
        .filter(|(q, _)| roles.is_proposer(*q))
        .filter_map(|(q, cs)| {
            let mut it = cs.into_iter();
            match (it.next(), it.next()) {
                (Some((c, count)), None) if count >= ctx.params.thr_avail() => Some((q, c)),
                _ => None,
            }
        })
        .collect()
}

/// Stored packets to broadcast once availability is known: only those
/// whose commitment matches the available one.
pub fn release_shreds(store: &RelayStore, slot: u64, available: &Availability) -> Vec<ShredPacket> {
    available
        .iter()
        .filter_map(|(&q, c)| store.get(slot, q).filter(|p| p.commitment == *c).cloned())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reconstruction {
    /// Fewer than `K + T` valid packets so far.
    Pending,
    /// Commitment did not match a re-encoding, or the batch failed to parse.
    Invalid,
    Batch(Vec<Transaction>),
}

/// Rebuilds a batch from the first `K + T` valid, distinct-index packets and
/// accepts it only if re-encoding reproduces the commitment.
pub fn reconstruct_batch(
    ctx: &Context,
    slot: u64,
    proposer: NodeId,
    commitment: &VectorCommitment,
    received: &[ShredPacket],
) -> Reconstruction {
    let need = ctx.params.thr_reconstruct();
    let field = &ctx.params.field;
    let mut chosen: Vec<&ShredPacket> = Vec::with_capacity(need);
    let mut used = BTreeSet::new();
    for p in received {
        if chosen.len() == need {
            break;
        }
        if p.proposer == proposer
            && p.slot == slot
            && p.commitment == *commitment
            && !used.contains(&p.index)
            && vc_verify(field, commitment, p.index, &p.shred, p.mask, &p.witness)
        {
            used.insert(p.index);
            chosen.push(p);
        }
    }
    if chosen.len() < need {
        return Reconstruction::Pending;
    }
    decode_and_check(ctx, commitment, &chosen).map_or(Reconstruction::Invalid, Reconstruction::Batch)
}

fn decode_and_check(ctx: &Context, commitment: &VectorCommitment, chosen: &[&ShredPacket]) -> Option<Vec<Transaction>> {
    let hecc = &ctx.hecc;
    let columns: Vec<(usize, &[FieldElement])> = chosen.iter().map(|p| (p.index, &p.shred[..])).collect();
    let coeffs = hecc.decode_columns(&columns).ok()?;
    let mask_pairs: Vec<(FieldElement, usize)> = chosen.iter().map(|p| (p.mask, p.index)).collect();
    let (m, r) = hecc.decode(&mask_pairs).ok()?;
    let masks = hecc.encode(&m, &r).ok()?;
    let shreds = hecc.encode_matrix(&coeffs);
    let tree = CommitmentTree::build(&ctx.params.field, &shreds.columns(), &masks).ok()?;
    if tree.commitment() != *commitment {
        return None;
    }
    decode_batch(&unpack(&ctx.params.field, &coeffs).ok()?)
}

/// `L[s]`: the union of all reconstructed batches minus already confirmed
/// transactions, sorted by id.
pub fn finalize_slot(results: &BTreeMap<NodeId, Option<Vec<Transaction>>>, confirmed: &HashSet<TxId>) -> Vec<Transaction> {
    let mut out: BTreeMap<TxId, Transaction> = BTreeMap::new();
    for batch in results.values().flatten() {
        for tx in batch {
            if !confirmed.contains(tx.id()) {
                out.entry(*tx.id()).or_insert_with(|| tx.clone());
            }
        }
    }
    out.into_values().collect()
}
