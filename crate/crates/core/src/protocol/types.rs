//! Wire types, their byte layouts and canonical signing bodies.

use std::collections::BTreeMap;

use sha2::{Digest as _, Sha256};

use super::NodeId;
use crate::commitment::{Digest, VectorCommitment, COMMITMENT_LEN, DIGEST_LEN};
use crate::field::{Field, FieldElement, ENCODING_WIDTH};
use crate::sig::{sign, KeyPair, PublicKey, SigTag, SigVerifier, Signature, SigningContext, SIGNATURE_LEN};

pub type TxId = [u8; 32];

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    id: TxId,
    payload: Vec<u8>,
}

impl std::fmt::Debug for Transaction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tx({}.., {}B)", hex::encode(&self.id[..4]), self.payload.len())
    }
}

impl Transaction {
    pub fn new(payload: Vec<u8>) -> Self {
        Transaction {
            id: Sha256::digest(&payload).into(),
            payload,
        }
    }

    pub fn id(&self) -> &TxId {
        &self.id
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }
}

/// Serializes a batch as `len_be32 ‖ payload` per transaction, in ascending
/// id order.
pub fn encode_batch<'a>(txs: impl IntoIterator<Item = &'a Transaction>) -> Vec<u8> {
    let mut sorted: Vec<&Transaction> = txs.into_iter().collect();
    sorted.sort_by_key(|a| a.id);
    sorted.dedup_by(|a, b| a.id == b.id);
    let mut out = Vec::new();
    for tx in sorted {
        out.extend_from_slice(&(tx.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&tx.payload);
    }
    out
}

/// Inverse of [`encode_batch`]; `None` on malformed framing.
pub fn decode_batch(bytes: &[u8]) -> Option<Vec<Transaction>> {
    let mut r = Reader::new(bytes);
    let mut txs = Vec::new();
    while !r.is_done() {
        let len = r.u32()? as usize;
        txs.push(Transaction::new(r.take(len)?.to_vec()));
    }
    Some(txs)
}

/// One relay's share of one proposer's batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShredPacket {
    pub slot: u64,
    pub proposer: NodeId,
    /// 1-based relay index.
    pub index: usize,
    pub commitment: VectorCommitment,
    /// Column `index` of the shred matrix, one element per row.
    pub shred: Vec<FieldElement>,
    /// The commitment randomness at `index`, itself an HECC shred.
    pub mask: FieldElement,
    pub witness: Vec<Digest>,
    pub signature: Signature,
}

impl ShredPacket {
    pub fn to_bytes(&self, field: &Field) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            56 + (self.shred.len() + 1) * ENCODING_WIDTH + self.witness.len() * DIGEST_LEN + SIGNATURE_LEN,
        );
        out.extend_from_slice(&self.slot.to_be_bytes());
        out.extend_from_slice(&self.proposer.to_be_bytes());
        out.extend_from_slice(&(self.index as u32).to_be_bytes());
        out.extend_from_slice(&self.commitment.to_bytes());
        out.extend_from_slice(&(self.shred.len() as u32).to_be_bytes());
        for &e in &self.shred {
            field.encode_into(e, &mut out);
        }
        field.encode_into(self.mask, &mut out);
        for w in &self.witness {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.signature.0);
        out
    }

    pub fn from_bytes(field: &Field, bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let slot = r.u64()?;
        let proposer = r.u32()?;
        let index = r.u32()? as usize;
        let commitment = VectorCommitment::from_bytes(r.take(COMMITMENT_LEN)?).ok()?;
        let rows = r.u32()? as usize;
        let mut shred = Vec::with_capacity(rows.min(bytes.len()));
        for _ in 0..rows {
            shred.push(field.decode(r.take(ENCODING_WIDTH)?)?);
        }
        let mask = field.decode(r.take(ENCODING_WIDTH)?)?;
        let mut witness = Vec::with_capacity(commitment.depth());
        for _ in 0..commitment.depth() {
            witness.push(r.array::<DIGEST_LEN>()?);
        }
        let signature = Signature(r.array::<SIGNATURE_LEN>()?);
        r.is_done().then_some(ShredPacket {
            slot,
            proposer,
            index,
            commitment,
            shred,
            mask,
            witness,
            signature,
        })
    }
}

pub fn sign_commitment(keys: &KeyPair, slot: u64, c: &VectorCommitment) -> Signature {
    sign(keys, &SigningContext::new(SigTag::Commit, slot, &c.to_bytes()))
}

pub fn verify_commitment(
    v: &dyn SigVerifier,
    pk: &PublicKey,
    slot: u64,
    c: &VectorCommitment,
    sig: &Signature,
) -> bool {
    v.verify(pk, &SigningContext::new(SigTag::Commit, slot, &c.to_bytes()), sig)
}

/// A relay's signed claim of timely receipt, proposer -> (commitment, sig).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attestation {
    pub relay: NodeId,
    pub slot: u64,
    pub entries: BTreeMap<NodeId, (VectorCommitment, Signature)>,
    pub signature: Signature,
}

impl Attestation {
    /// Canonical signing body.
    pub fn body(entries: &BTreeMap<NodeId, (VectorCommitment, Signature)>) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + entries.len() * (4 + COMMITMENT_LEN + SIGNATURE_LEN));
        out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
        for (q, (c, sig)) in entries {
            out.extend_from_slice(&q.to_be_bytes());
            out.extend_from_slice(&c.to_bytes());
            out.extend_from_slice(&sig.0);
        }
        out
    }

    pub fn create(keys: &KeyPair, relay: NodeId, slot: u64, entries: BTreeMap<NodeId, (VectorCommitment, Signature)>) -> Self {
        let signature = sign(keys, &SigningContext::new(SigTag::Attest, slot, &Self::body(&entries)));
        Attestation {
            relay,
            slot,
            entries,
            signature,
        }
    }

    pub fn verify_signature(&self, v: &dyn SigVerifier, pk: &PublicKey) -> bool {
        v.verify(
            pk,
            &SigningContext::new(SigTag::Attest, self.slot, &Self::body(&self.entries)),
            &self.signature,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.relay.to_be_bytes());
        out.extend_from_slice(&self.slot.to_be_bytes());
        out.extend_from_slice(&Self::body(&self.entries));
        out.extend_from_slice(&self.signature.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let relay = r.u32()?;
        let slot = r.u64()?;
        let entries = read_attest_entries(&mut r)?;
        let signature = Signature(r.array()?);
        r.is_done().then_some(Attestation {
            relay,
            slot,
            entries,
            signature,
        })
    }
}

fn read_attest_entries(r: &mut Reader<'_>) -> Option<BTreeMap<NodeId, (VectorCommitment, Signature)>> {
    let count = r.u32()?;
    let mut entries = BTreeMap::new();
    let mut last = None;
    for _ in 0..count {
        let q = r.u32()?;
        if last.is_some_and(|l| l >= q) {
            return None;
        }
        last = Some(q);
        let c = VectorCommitment::from_bytes(r.take(COMMITMENT_LEN)?).ok()?;
        entries.insert(q, (c, Signature(r.array()?)));
    }
    Some(entries)
}

/// The leader's signed aggregation of attestations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub slot: u64,
    pub leader: NodeId,
    pub entries: BTreeMap<NodeId, Attestation>,
    pub signature: Signature,
}

impl Block {
    pub fn body(entries: &BTreeMap<NodeId, Attestation>) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
        for (relay, att) in entries {
            out.extend_from_slice(&relay.to_be_bytes());
            out.extend_from_slice(&Attestation::body(&att.entries));
            out.extend_from_slice(&att.signature.0);
        }
        out
    }

    pub fn create(keys: &KeyPair, leader: NodeId, slot: u64, entries: BTreeMap<NodeId, Attestation>) -> Self {
        let signature = sign(keys, &SigningContext::new(SigTag::Block, slot, &Self::body(&entries)));
        Block {
            slot,
            leader,
            entries,
            signature,
        }
    }

    pub fn verify_signature(&self, v: &dyn SigVerifier, pk: &PublicKey) -> bool {
        v.verify(
            pk,
            &SigningContext::new(SigTag::Block, self.slot, &Self::body(&self.entries)),
            &self.signature,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.slot.to_be_bytes());
        out.extend_from_slice(&self.leader.to_be_bytes());
        out.extend_from_slice(&Self::body(&self.entries));
        out.extend_from_slice(&self.signature.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader::new(bytes);
        let slot = r.u64()?;
        let leader = r.u32()?;
        let count = r.u32()?;
        let mut entries = BTreeMap::new();
        let mut last = None;
        for _ in 0..count {
            let relay = r.u32()?;
            if last.is_some_and(|l| l >= relay) {
                return None;
            }
            last = Some(relay);
            let inner = read_attest_entries(&mut r)?;
            let signature = Signature(r.array()?);
            entries.insert(
                relay,
                Attestation {
                    relay,
                    slot,
                    entries: inner,
                    signature,
                },
            );
        }
        let signature = Signature(r.array()?);
        r.is_done().then_some(Block {
            slot,
            leader,
            entries,
            signature,
        })
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

/// Bounds-checked big-endian cursor.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, len: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(len)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|b| b.try_into().expect("length checked"))
    }

    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.array().map(u32::from_be_bytes)
    }

    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.array().map(u64::from_be_bytes)
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::CommitmentTree;
    use crate::sig::{keygen, DirectVerifier};

    fn keys(i: u8) -> KeyPair {
        keygen(&[i; 32])
    }

    fn commitment(field: &Field, tag: u64) -> VectorCommitment {
        let rows = vec![vec![field.elem(tag)], vec![field.elem(tag + 1)]];
        CommitmentTree::build(field, &rows, &[field.elem(1), field.elem(2)])
            .unwrap()
            .commitment()
    }

    #[test]
    fn transaction_id_is_payload_hash() {
        let tx = Transaction::new(b"abc".to_vec());
        assert_eq!(
            hex::encode(tx.id()),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn batch_round_trip_sorted_and_deduped() {
        let a = Transaction::new(b"a".to_vec());
        let b = Transaction::new(b"bb".to_vec());
        let bytes = encode_batch([&b, &a, &b]);
        let back = decode_batch(&bytes).unwrap();
        let mut expected = vec![a, b];
        expected.sort_by(|x, y| x.id().cmp(y.id()));
        assert_eq!(back, expected);
        assert_eq!(bytes.len(), 4 + 1 + 4 + 2);
        assert_eq!(decode_batch(&[]).unwrap(), vec![]);
        assert!(decode_batch(&[0, 0, 0, 5, 1]).is_none());
    }

    #[test]
    fn attestation_body_layout() {
        let f = Field::mersenne61();
        let c = commitment(&f, 3);
        let sig = Signature([7; 64]);
        let mut entries = BTreeMap::new();
        entries.insert(9, (c, sig));
        entries.insert(2, (c, sig));
        let body = Attestation::body(&entries);
        assert_eq!(&body[..4], &[0, 0, 0, 2]);
        assert_eq!(&body[4..8], &[0, 0, 0, 2]);
        assert_eq!(&body[8..44], &c.to_bytes());
        assert_eq!(&body[44..108], &[7; 64]);
        assert_eq!(&body[108..112], &[0, 0, 0, 9]);
        assert_eq!(body.len(), 4 + 2 * 104);
    }

    #[test]
    fn attestation_and_block_round_trip() {
        let f = Field::mersenne61();
        let v = DirectVerifier;
        let prop = keys(1);
        let relay = keys(2);
        let leader = keys(3);
        let c = commitment(&f, 5);
        let mut entries = BTreeMap::new();
        entries.insert(4, (c, sign_commitment(&prop, 6, &c)));
        let att = Attestation::create(&relay, 11, 6, entries);
        assert!(att.verify_signature(&v, relay.public()));
        assert!(!att.verify_signature(&v, prop.public()));
        assert_eq!(Attestation::from_bytes(&att.to_bytes()).unwrap(), att);

        let mut blocks = BTreeMap::new();
        blocks.insert(11, att.clone());
        let block = Block::create(&leader, 0, 6, blocks);
        assert!(block.verify_signature(&v, leader.public()));
        let back = Block::from_bytes(&block.to_bytes()).unwrap();
        assert_eq!(back, block);
        assert!(back.entries[&11].verify_signature(&v, relay.public()));

        let bytes = block.to_bytes();
        assert!(Block::from_bytes(&bytes[..bytes.len() - 1]).is_none());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(Block::from_bytes(&longer).is_none());
    }

    #[test]
    fn packet_round_trip() {
        let f = Field::new(97).unwrap();
        let rows = vec![vec![f.elem(1), f.elem(2)], vec![f.elem(3), f.elem(4)], vec![f.elem(5), f.elem(6)]];
        let tree = CommitmentTree::build(&f, &rows, &[f.elem(7), f.elem(8), f.elem(9)]).unwrap();
        let o = tree.open(2).unwrap();
        let p = ShredPacket {
            slot: 3,
            proposer: 1,
            index: 2,
            commitment: tree.commitment(),
            shred: o.value,
            mask: o.randomness,
            witness: o.witness,
            signature: Signature([1; 64]),
        };
        let bytes = p.to_bytes(&f);
        assert_eq!(ShredPacket::from_bytes(&f, &bytes).unwrap(), p);
        assert!(ShredPacket::from_bytes(&f, &bytes[1..]).is_none());
    }
}
