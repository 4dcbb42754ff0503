//! Hiding Merkle-tree vector commitment.
//!
//! Every leaf hash mixes in a per-position randomness element, and every node
//! hash is prefixed with the node's textual label. For a tree of depth `d`
//! the label of a node `k` levels below the root is its `k` path bits
//! followed by `d - k` `'*'` characters, so leaf `i` (1-based) is labeled with
//! the `d`-bit binary form of `i - 1` and the root with `d` stars.
//!
//! ```text
//! leaf:     h = SHA-256(label ‖ enc(v_i) ‖ enc(r_i))
//! interior: h = SHA-256(label ‖ h_left ‖ h_right)
//! ```
//!
//! Leaves may carry a row of field elements instead of a single value; the
//! encodings are concatenated, which coincides with the scalar form for rows
//! of length one.

use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::field::{Field, FieldElement, ENCODING_WIDTH};

pub type Digest = [u8; 32];

pub const DIGEST_LEN: usize = 32;

/// Serialized width of a [`VectorCommitment`].
pub const COMMITMENT_LEN: usize = DIGEST_LEN + 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommitError {
    #[error("values and randomness differ in length ({values} vs {randomness})")]
    LengthMismatch { values: usize, randomness: usize },
    #[error("cannot commit to an empty vector")]
    Empty,
    #[error("index {index} outside [1, {len}]")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("leaf rows differ in width")]
    RaggedRows,
    #[error("malformed encoding")]
    Malformed,
}

/// Root of the tree plus the original (pre-padding) vector length.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VectorCommitment {
    root: Digest,
    len: u32,
}

impl std::fmt::Debug for VectorCommitment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VC({}.., L={})", hex::encode(&self.root[..6]), self.len)
    }
}

impl VectorCommitment {
    pub fn root(&self) -> &Digest {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn padded_len(&self) -> usize {
        (self.len as usize).next_power_of_two()
    }

    pub fn depth(&self) -> usize {
        self.padded_len().trailing_zeros() as usize
    }

    /// `root ‖ len_be32`.
    pub fn to_bytes(&self) -> [u8; COMMITMENT_LEN] {
        let mut out = [0u8; COMMITMENT_LEN];
        out[..DIGEST_LEN].copy_from_slice(&self.root);
        out[DIGEST_LEN..].copy_from_slice(&self.len.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CommitError> {
        if bytes.len() != COMMITMENT_LEN {
            return Err(CommitError::Malformed);
        }
        let root: Digest = bytes[..DIGEST_LEN].try_into().expect("length checked");
        let len = u32::from_be_bytes(bytes[DIGEST_LEN..].try_into().expect("length checked"));
        if len == 0 {
            return Err(CommitError::Malformed);
        }
        Ok(VectorCommitment { root, len })
    }
}

/// Opening of one position. Sibling digests are ordered leaf-adjacent first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Opening {
    pub index: usize,
    pub value: Vec<FieldElement>,
    pub randomness: FieldElement,
    pub witness: Vec<Digest>,
}

impl Opening {
    /// `index_be32 ‖ enc(v) ‖ enc(r) ‖ witness`.
    pub fn to_bytes(&self, field: &Field) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + (self.value.len() + 1) * ENCODING_WIDTH + self.witness.len() * DIGEST_LEN);
        out.extend_from_slice(&(self.index as u32).to_be_bytes());
        for &v in &self.value {
            field.encode_into(v, &mut out);
        }
        field.encode_into(self.randomness, &mut out);
        for w in &self.witness {
            out.extend_from_slice(w);
        }
        out
    }

    /// Parses an opening whose value row has `width` elements and whose
    /// witness has `depth` digests.
    pub fn from_bytes(field: &Field, bytes: &[u8], width: usize, depth: usize) -> Result<Self, CommitError> {
        let expected = 4 + (width + 1) * ENCODING_WIDTH + depth * DIGEST_LEN;
        if bytes.len() != expected {
            return Err(CommitError::Malformed);
        }
        let index = u32::from_be_bytes(bytes[..4].try_into().expect("length checked")) as usize;
        let mut off = 4;
        let mut take_elem = || {
            let e = field.decode(&bytes[off..off + ENCODING_WIDTH]);
            off += ENCODING_WIDTH;
            e.ok_or(CommitError::Malformed)
        };
        let value = (0..width).map(|_| take_elem()).collect::<Result<Vec<_>, _>>()?;
        let randomness = take_elem()?;
        let witness = bytes[off..]
            .chunks_exact(DIGEST_LEN)
            .map(|c| c.try_into().expect("chunk width"))
            .collect();
        Ok(Opening {
            index,
            value,
            randomness,
            witness,
        })
    }
}

/// Label of the node at `layer` levels above the leaves and horizontal
/// position `pos` in a tree of depth `depth`.
pub fn node_label(depth: usize, layer: usize, pos: usize) -> String {
    let bits = depth - layer;
    let mut s = String::with_capacity(depth);
    for b in (0..bits).rev() {
        s.push(if (pos >> b) & 1 == 1 { '1' } else { '0' });
    }
    s.extend(std::iter::repeat_n('*', layer));
    s
}

/// Label of leaf `index` (1-based).
pub fn leaf_label(depth: usize, index: usize) -> String {
    node_label(depth, 0, index - 1)
}

pub fn hash_leaf(field: &Field, label: &str, value: &[FieldElement], randomness: FieldElement) -> Digest {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    for &v in value {
        h.update(field.encode(v));
    }
    h.update(field.encode(randomness));
    h.finalize().into()
}

pub fn hash_interior(label: &str, left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// A fully materialized tree; keeps every layer so openings are cheap.
#[derive(Clone, Debug)]
pub struct CommitmentTree {
    commitment: VectorCommitment,
    values: Vec<Vec<FieldElement>>,
    randomness: Vec<FieldElement>,
    /// `layers[0]` are leaf digests, the last layer holds the root.
    layers: Vec<Vec<Digest>>,
}

impl CommitmentTree {
    /// Commits to a vector of value rows with one randomness element per
    /// position. Short vectors are padded to a power of two with all-zero
    /// entries.
    pub fn build(
        field: &Field,
        values: &[Vec<FieldElement>],
        randomness: &[FieldElement],
    ) -> Result<Self, CommitError> {
        if values.len() != randomness.len() {
            return Err(CommitError::LengthMismatch {
                values: values.len(),
                randomness: randomness.len(),
            });
        }
        if values.is_empty() {
            return Err(CommitError::Empty);
        }
        let width = values[0].len();
        if values.iter().any(|v| v.len() != width) {
            return Err(CommitError::RaggedRows);
        }
        let len = values.len();
        let padded = len.next_power_of_two();
        let depth = padded.trailing_zeros() as usize;
        let zero_row = vec![field.zero(); width];
        let leaves: Vec<Digest> = (0..padded)
            .map(|pos| {
                let (v, r) = if pos < len {
                    (&values[pos][..], randomness[pos])
                } else {
                    (&zero_row[..], field.zero())
                };
                hash_leaf(field, &node_label(depth, 0, pos), v, r)
            })
            .collect();
        let mut layers = vec![leaves];
        for layer in 1..=depth {
            let below = &layers[layer - 1];
            let next = below
                .chunks_exact(2)
                .enumerate()
                .map(|(pos, pair)| hash_interior(&node_label(depth, layer, pos), &pair[0], &pair[1]))
                .collect();
            layers.push(next);
        }
        let root = layers[depth][0];
        Ok(CommitmentTree {
            commitment: VectorCommitment { root, len: len as u32 },
            values: values.to_vec(),
            randomness: randomness.to_vec(),
            layers,
        })
    }

    pub fn commitment(&self) -> VectorCommitment {
        self.commitment
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Digest stored at a node, addressed as in [`node_label`].
    pub fn node(&self, layer: usize, pos: usize) -> Option<&Digest> {
        self.layers.get(layer).and_then(|l| l.get(pos))
    }

    pub fn open(&self, index: usize) -> Result<Opening, CommitError> {
        let len = self.commitment.len();
        if index == 0 || index > len {
            return Err(CommitError::IndexOutOfRange { index, len });
        }
        let mut pos = index - 1;
        let mut witness = Vec::with_capacity(self.depth());
        for layer in &self.layers[..self.depth()] {
            witness.push(layer[pos ^ 1]);
            pos >>= 1;
        }
        Ok(Opening {
            index,
            value: self.values[index - 1].clone(),
            randomness: self.randomness[index - 1],
            witness,
        })
    }
}

/// Scalar-valued commitment.
pub fn vc_commit(
    field: &Field,
    values: &[FieldElement],
    randomness: &[FieldElement],
) -> Result<VectorCommitment, CommitError> {
    let rows: Vec<Vec<FieldElement>> = values.iter().map(|&v| vec![v]).collect();
    Ok(CommitmentTree::build(field, &rows, randomness)?.commitment())
}

pub fn vc_open(
    field: &Field,
    values: &[FieldElement],
    randomness: &[FieldElement],
    index: usize,
) -> Result<Opening, CommitError> {
    let rows: Vec<Vec<FieldElement>> = values.iter().map(|&v| vec![v]).collect();
    CommitmentTree::build(field, &rows, randomness)?.open(index)
}

/// Total verification: malformed or mismatched input is a rejection.
pub fn vc_verify(
    field: &Field,
    commitment: &VectorCommitment,
    index: usize,
    value: &[FieldElement],
    randomness: FieldElement,
    witness: &[Digest],
) -> bool {
    let len = commitment.len();
    if index == 0 || index > len {
        return false;
    }
    let depth = commitment.depth();
    if witness.len() != depth {
        return false;
    }
    if value.iter().chain(std::iter::once(&randomness)).any(|e| e.value() >= field.modulus()) {
        return false;
    }
    let mut pos = index - 1;
    let mut acc = hash_leaf(field, &node_label(depth, 0, pos), value, randomness);
    for (layer, sibling) in witness.iter().enumerate() {
        let (l, r) = if pos & 1 == 0 { (&acc, sibling) } else { (sibling, &acc) };
        pos >>= 1;
        acc = hash_interior(&node_label(depth, layer + 1, pos), l, r);
    }
    acc == commitment.root
}

pub fn vc_verify_opening(field: &Field, commitment: &VectorCommitment, opening: &Opening) -> bool {
    vc_verify(
        field,
        commitment,
        opening.index,
        &opening.value,
        opening.randomness,
        &opening.witness,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sha(parts: &[&[u8]]) -> Digest {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.finalize().into()
    }

    #[test]
    fn labels() {
        assert_eq!(leaf_label(3, 3), "010");
        assert_eq!(node_label(3, 1, 1), "01*");
        assert_eq!(node_label(3, 2, 0), "0**");
        assert_eq!(node_label(3, 3, 0), "***");
        assert_eq!(node_label(0, 0, 0), "");
        let all: std::collections::HashSet<String> = (0..=3)
            .flat_map(|layer| (0..(8 >> layer)).map(move |pos| node_label(3, layer, pos)))
            .collect();
        assert_eq!(all.len(), 15);
    }

    #[test]
    fn single_leaf_tree() {
        let f = Field::new(7).unwrap();
        let c = vc_commit(&f, &[f.elem(5)], &[f.elem(2)]).unwrap();
        let expected = sha(&[b"", &f.encode(f.elem(5)), &f.encode(f.elem(2))]);
        assert_eq!(c.root(), &expected);
        assert_eq!(c.depth(), 0);
        let o = vc_open(&f, &[f.elem(5)], &[f.elem(2)], 1).unwrap();
        assert!(o.witness.is_empty());
        assert!(vc_verify_opening(&f, &c, &o));
    }

    #[test]
    fn two_leaf_structure() {
        let f = Field::new(7).unwrap();
        let v = [f.elem(1), f.elem(2)];
        let r = [f.elem(3), f.elem(4)];
        let c = vc_commit(&f, &v, &r).unwrap();
        let h0 = sha(&[b"0", &f.encode(v[0]), &f.encode(r[0])]);
        let h1 = sha(&[b"1", &f.encode(v[1]), &f.encode(r[1])]);
        assert_eq!(c.root(), &sha(&[b"*", &h0, &h1]));
        assert_eq!(vc_open(&f, &v, &r, 1).unwrap().witness, vec![h1]);
    }

    #[test]
    fn figure_example_index_three() {
        let f = Field::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let v = f.random_vec(&mut rng, 8);
        let r = f.random_vec(&mut rng, 8);
        // independent recomputation by label name
        let leaf = |i: usize, label: &str| sha(&[label.as_bytes(), &f.encode(v[i - 1]), &f.encode(r[i - 1])]);
        let h000 = leaf(1, "000");
        let h001 = leaf(2, "001");
        let h010 = leaf(3, "010");
        let h011 = leaf(4, "011");
        let h100 = leaf(5, "100");
        let h101 = leaf(6, "101");
        let h110 = leaf(7, "110");
        let h111 = leaf(8, "111");
        let h00s = sha(&[b"00*", &h000, &h001]);
        let h01s = sha(&[b"01*", &h010, &h011]);
        let h10s = sha(&[b"10*", &h100, &h101]);
        let h11s = sha(&[b"11*", &h110, &h111]);
        let h0ss = sha(&[b"0**", &h00s, &h01s]);
        let h1ss = sha(&[b"1**", &h10s, &h11s]);
        let root = sha(&[b"***", &h0ss, &h1ss]);

        let c = vc_commit(&f, &v, &r).unwrap();
        assert_eq!(c.root(), &root);
        let o = vc_open(&f, &v, &r, 3).unwrap();
        assert_eq!(o.witness, vec![h011, h00s, h1ss]);
        assert_eq!((o.value[0], o.randomness), (v[2], r[2]));
        assert!(vc_verify_opening(&f, &c, &o));
    }

    #[test]
    fn round_trip_all_positions() {
        let f = Field::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for len in [1usize, 2, 3, 5, 8, 13, 16] {
            let v = f.random_vec(&mut rng, len);
            let r = f.random_vec(&mut rng, len);
            let c = vc_commit(&f, &v, &r).unwrap();
            assert_eq!(c.len(), len);
            for i in 1..=len {
                let o = vc_open(&f, &v, &r, i).unwrap();
                assert!(vc_verify_opening(&f, &c, &o), "len {len} index {i}");
            }
        }
    }

    #[test]
    fn errors_and_rejections() {
        let f = Field::new(7).unwrap();
        let v = [f.elem(1), f.elem(2), f.elem(3)];
        let r = [f.elem(0), f.elem(0), f.elem(6)];
        assert!(matches!(vc_commit(&f, &v, &r[..2]), Err(CommitError::LengthMismatch { .. })));
        assert_eq!(vc_commit(&f, &[], &[]), Err(CommitError::Empty));
        assert!(matches!(vc_open(&f, &v, &r, 4), Err(CommitError::IndexOutOfRange { .. })));
        assert!(matches!(vc_open(&f, &v, &r, 0), Err(CommitError::IndexOutOfRange { .. })));

        let c = vc_commit(&f, &v, &r).unwrap();
        let o = vc_open(&f, &v, &r, 2).unwrap();
        // padded position 4 is never openable
        assert!(!vc_verify(&f, &c, 4, &[f.zero()], f.zero(), &o.witness));
        assert!(!vc_verify(&f, &c, 2, &o.value, o.randomness, &o.witness[..1]));
        let mut long = o.witness.clone();
        long.push([0; 32]);
        assert!(!vc_verify(&f, &c, 2, &o.value, o.randomness, &long));
        assert!(!vc_verify(&f, &c, 1, &o.value, o.randomness, &o.witness));
        assert!(!vc_verify(&f, &c, 2, &[f.elem(3)], o.randomness, &o.witness));
    }

    #[test]
    fn randomness_changes_root() {
        let f = Field::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let len = rng.gen_range(1..20);
            let v = f.random_vec(&mut rng, len);
            let mut r = f.random_vec(&mut rng, len);
            let before = vc_commit(&f, &v, &r).unwrap();
            r[0] = f.add(r[0], f.one());
            assert_ne!(before, vc_commit(&f, &v, &r).unwrap());
        }
    }

    #[test]
    fn serialization_layouts() {
        let f = Field::mersenne61();
        let v = [f.elem(9), f.elem(10), f.elem(11)];
        let r = [f.elem(1), f.elem(2), f.elem(3)];
        let c = vc_commit(&f, &v, &r).unwrap();
        let bytes = c.to_bytes();
        assert_eq!(&bytes[32..], &[0, 0, 0, 3]);
        assert_eq!(VectorCommitment::from_bytes(&bytes).unwrap(), c);
        let o = vc_open(&f, &v, &r, 2).unwrap();
        let ob = o.to_bytes(&f);
        assert_eq!(ob.len(), 4 + 8 + 8 + 2 * 32);
        assert_eq!(&ob[..4], &[0, 0, 0, 2]);
        assert_eq!(&ob[4..12], &f.encode(f.elem(10)));
        assert_eq!(&ob[12..20], &f.encode(f.elem(2)));
        assert_eq!(Opening::from_bytes(&f, &ob, 1, 2).unwrap(), o);
        assert!(Opening::from_bytes(&f, &ob[1..], 1, 2).is_err());
    }

    #[test]
    fn row_leaves() {
        let f = Field::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<FieldElement>> = (0..5).map(|_| f.random_vec(&mut rng, 3)).collect();
        let r = f.random_vec(&mut rng, 5);
        let tree = CommitmentTree::build(&f, &rows, &r).unwrap();
        for i in 1..=5 {
            assert!(vc_verify_opening(&f, &tree.commitment(), &tree.open(i).unwrap()));
        }
        let ragged = vec![vec![f.one()], vec![f.one(), f.one()]];
        assert_eq!(
            CommitmentTree::build(&f, &ragged, &r[..2]).unwrap_err(),
            CommitError::RaggedRows
        );
    }
}
