//! Hiding erasure-correcting code.
//!
//! A message of `K` field elements is extended with `T` random elements and
//! the resulting `K + T` coefficients are evaluated Reed-Solomon style at the
//! `N` canonical domain points. Any `K + T` shreds recover message and
//! randomness; any `T` shreds are uniformly distributed whatever the message.
//!
//! The batched codec applies the same code row by row so that byte payloads of
//! any size can be carried. Each shred then becomes a column of the shred
//! matrix, and every row draws fresh randomness.

use rand::Rng;
use thiserror::Error;

use crate::field::{EvalDomain, Field, FieldElement, FieldError, LagrangeBasis, Polynomial};

/// Bytes of the big-endian length prefix in front of every packed payload.
pub const LENGTH_PREFIX: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeccError {
    #[error("invalid code parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("shred index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("duplicate shred index {0}")]
    DuplicateIndex(usize),
    #[error("payload of {len} bytes exceeds capacity of {capacity} bytes")]
    PayloadTooLarge { len: usize, capacity: usize },
    #[error("corrupt payload framing")]
    CorruptFraming,
    #[error("invalid message/randomness split ({k}, {t})")]
    InvalidSplit { k: usize, t: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Code dimensions: `N` shreds, `K` message and `T` randomness elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeccParams {
    pub n: usize,
    pub k: usize,
    pub t: usize,
}

impl HeccParams {
    pub fn new(n: usize, k: usize, t: usize) -> Self {
        HeccParams { n, k, t }
    }

    /// Shreds needed to decode.
    pub fn threshold(&self) -> usize {
        self.k + self.t
    }
}

/// A fixed code instance over a field.
#[derive(Debug, Clone)]
pub struct Hecc {
    field: Field,
    params: HeccParams,
    domain: EvalDomain,
    /// `powers[i][j] = alpha_{i+1}^j` for `j < K + T`.
    powers: Vec<Vec<FieldElement>>,
}

impl Hecc {
    pub fn new(field: Field, params: HeccParams) -> Result<Self, HeccError> {
        let HeccParams { n, k, t } = params;
        if k + t == 0 {
            return Err(HeccError::InvalidParams("K + T must be positive".into()));
        }
        if n < k + t {
            return Err(HeccError::InvalidParams(format!(
                "N = {n} is smaller than K + T = {}",
                k + t
            )));
        }
        let domain = EvalDomain::canonical(&field, n)?;
        let powers = domain
            .points()
            .iter()
            .map(|&a| {
                let mut row = Vec::with_capacity(k + t);
                let mut acc = field.one();
                for _ in 0..k + t {
                    row.push(acc);
                    acc = field.mul(acc, a);
                }
                row
            })
            .collect();
        Ok(Hecc {
            field,
            params,
            domain,
            powers,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn params(&self) -> HeccParams {
        self.params
    }

    pub fn domain(&self) -> &EvalDomain {
        &self.domain
    }

    /// Shreds of the polynomial with coefficients `m ‖ r` (lowest first).
    pub fn encode(&self, m: &[FieldElement], r: &[FieldElement]) -> Result<Vec<FieldElement>, HeccError> {
        check_len("message elements", self.params.k, m.len())?;
        check_len("randomness elements", self.params.t, r.len())?;
        let coeffs: Vec<_> = m.iter().chain(r).copied().collect();
        Ok(self.encode_coeffs(&coeffs))
    }

    /// Evaluates `K + T` coefficients at every domain point.
    pub fn encode_coeffs(&self, coeffs: &[FieldElement]) -> Vec<FieldElement> {
        debug_assert_eq!(coeffs.len(), self.params.threshold());
        let f = &self.field;
        self.powers
            .iter()
            .map(|pw| {
                pw.iter()
                    .zip(coeffs)
                    .fold(f.zero(), |acc, (&a, &c)| f.add(acc, f.mul(a, c)))
            })
            .collect()
    }

    /// Recovers `(m, r)` from exactly `K + T` `(shred, index)` pairs.
    ///
    /// Shreds are not checked for consistency with any codeword; a substituted
    /// shred simply yields some other `(m, r)`.
    pub fn decode(
        &self,
        pairs: &[(FieldElement, usize)],
    ) -> Result<(Vec<FieldElement>, Vec<FieldElement>), HeccError> {
        let indices: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let basis = self.basis_for(&indices)?;
        let ys: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let mut coeffs = basis.interpolate(&ys)?.into_coefficients();
        let r = coeffs.split_off(self.params.k);
        Ok((coeffs, r))
    }

    /// Interpolation basis for a set of 1-based shred indices.
    pub fn basis_for(&self, indices: &[usize]) -> Result<LagrangeBasis, HeccError> {
        check_len("shreds", self.params.threshold(), indices.len())?;
        let mut xs = Vec::with_capacity(indices.len());
        for (pos, &i) in indices.iter().enumerate() {
            let x = self.domain.point(i).ok_or(HeccError::IndexOutOfRange(i))?;
            if indices[..pos].contains(&i) {
                return Err(HeccError::DuplicateIndex(i));
            }
            xs.push(x);
        }
        Ok(LagrangeBasis::new(&self.field, &xs)?)
    }

    /// Encodes every row of a coefficient matrix (`rows x (K + T)`), producing
    /// a shred matrix.
    pub fn encode_matrix(&self, coeff_rows: &[Vec<FieldElement>]) -> ShredMatrix {
        ShredMatrix {
            n: self.params.n,
            rows: coeff_rows.iter().map(|c| self.encode_coeffs(c)).collect(),
        }
    }

    /// Recovers the coefficient matrix from `K + T` shred columns, given as
    /// `(1-based index, column)`. All columns must have the same height.
    pub fn decode_columns(
        &self,
        columns: &[(usize, &[FieldElement])],
    ) -> Result<Vec<Vec<FieldElement>>, HeccError> {
        let indices: Vec<usize> = columns.iter().map(|c| c.0).collect();
        let basis = self.basis_for(&indices)?;
        let height = columns.first().map_or(0, |c| c.1.len());
        for c in columns {
            check_len("column height", height, c.1.len())?;
        }
        (0..height)
            .map(|row| {
                let ys: Vec<_> = columns.iter().map(|c| c.1[row]).collect();
                Ok(basis.interpolate(&ys)?.into_coefficients())
            })
            .collect()
    }

    /// Number of rows needed to carry `payload_len` bytes (plus the length
    /// prefix) in the first `k_payload` coefficients of each row.
    pub fn rows_for(&self, payload_len: usize, k_payload: usize) -> usize {
        let bits = (payload_len + LENGTH_PREFIX) * 8;
        let per_elem = self.field.payload_bits() as usize;
        let elems = bits.div_ceil(per_elem);
        elems.div_ceil(k_payload.max(1)).max(1)
    }

    /// Byte capacity of `rows` rows when `k_payload` coefficients per row carry
    /// payload.
    pub fn capacity(&self, rows: usize, k_payload: usize) -> usize {
        let bits = rows * k_payload * self.field.payload_bits() as usize;
        (bits / 8).saturating_sub(LENGTH_PREFIX)
    }

    /// Batched encoding of a byte payload with the default `(K, T)` split.
    pub fn encode_bytes<R: Rng + ?Sized>(
        &self,
        rows: usize,
        payload: &[u8],
        rng: &mut R,
    ) -> Result<EncodedBytes, HeccError> {
        self.encode_bytes_split(self.params.k, self.params.t, rows, payload, rng)
    }

    /// Batched encoding with a per-encoder split `k_payload + t_extra = K + T`,
    /// `t_extra >= T`. The decoder does not need to know the split: the
    /// payload is packed coefficient-major and framed by its length prefix.
    pub fn encode_bytes_split<R: Rng + ?Sized>(
        &self,
        k_payload: usize,
        t_extra: usize,
        rows: usize,
        payload: &[u8],
        rng: &mut R,
    ) -> Result<EncodedBytes, HeccError> {
        if k_payload == 0 || k_payload + t_extra != self.params.threshold() || t_extra < self.params.t {
            return Err(HeccError::InvalidSplit {
                k: k_payload,
                t: t_extra,
            });
        }
        let capacity = self.capacity(rows, k_payload);
        if payload.len() > capacity || payload.len() > u32::MAX as usize {
            return Err(HeccError::PayloadTooLarge {
                len: payload.len(),
                capacity,
            });
        }
        let packed = pack(&self.field, payload, rows * k_payload);
        let mut coeff_rows = vec![Vec::with_capacity(self.params.threshold()); rows];
        // coefficient-major: element e sits at (row e % rows, coefficient e / rows)
        for (e, v) in packed.into_iter().enumerate() {
            coeff_rows[e % rows].push(v);
        }
        let mut randomness = Vec::with_capacity(rows);
        for row in coeff_rows.iter_mut() {
            let r = self.field.random_vec(rng, t_extra);
            row.extend_from_slice(&r);
            randomness.push(r);
        }
        let shreds = self.encode_matrix(&coeff_rows);
        Ok(EncodedBytes {
            shreds,
            coefficients: coeff_rows,
            randomness,
        })
    }

    /// Inverse of [`Hecc::encode_bytes`] from any `K + T` columns.
    pub fn decode_bytes(&self, columns: &[(usize, &[FieldElement])]) -> Result<Vec<u8>, HeccError> {
        let coeffs = self.decode_columns(columns)?;
        unpack(&self.field, &coeffs)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), HeccError> {
    if expected == got {
        Ok(())
    } else {
        Err(HeccError::LengthMismatch { what, expected, got })
    }
}

/// Output of the batched encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBytes {
    pub shreds: ShredMatrix,
    /// Full coefficient rows (`K + T` each), payload and randomness.
    pub coefficients: Vec<Vec<FieldElement>>,
    /// The random coefficients drawn for each row.
    pub randomness: Vec<Vec<FieldElement>>,
}

/// Row-major shred matrix: `rows` codewords of length `N`. Shred `i` is
/// column `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShredMatrix {
    n: usize,
    rows: Vec<Vec<FieldElement>>,
}

impl ShredMatrix {
    pub fn from_rows(n: usize, rows: Vec<Vec<FieldElement>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == n));
        ShredMatrix { n, rows }
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<FieldElement>] {
        &self.rows
    }

    /// Shred for a 1-based index.
    pub fn column(&self, index: usize) -> Vec<FieldElement> {
        self.rows.iter().map(|r| r[index - 1]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<FieldElement>> {
        (1..=self.n).map(|i| self.column(i)).collect()
    }
}

/// Packs `len_be32 ‖ payload` into exactly `elements` field elements,
/// `payload_bits` bits each, MSB first, zero padded.
pub fn pack(field: &Field, payload: &[u8], elements: usize) -> Vec<FieldElement> {
    let bits = field.payload_bits();
    let mut out = Vec::with_capacity(elements);
    let mut acc: u128 = 0;
    let mut filled: u32 = 0;
    let prefix = (payload.len() as u32).to_be_bytes();
    for &byte in prefix.iter().chain(payload) {
        acc = (acc << 8) | byte as u128;
        filled += 8;
        while filled >= bits {
            let v = (acc >> (filled - bits)) as u64 & ((1u64 << bits) - 1);
            out.push(field.elem(v));
            filled -= bits;
            acc &= (1u128 << filled) - 1;
        }
    }
    if filled > 0 {
        let v = ((acc << (bits - filled)) as u64) & ((1u64 << bits) - 1);
        out.push(field.elem(v));
    }
    debug_assert!(out.len() <= elements, "payload exceeds packing capacity");
    out.resize(elements, field.zero());
    out
}

/// Reads the framed payload back out of coefficient rows, consuming elements
/// coefficient-major.
pub fn unpack(field: &Field, coeff_rows: &[Vec<FieldElement>]) -> Result<Vec<u8>, HeccError> {
    let rows = coeff_rows.len();
    let width = coeff_rows.first().map_or(0, |r| r.len());
    let elems = (0..width).flat_map(|c| (0..rows).map(move |r| (r, c))).map(|(r, c)| coeff_rows[r][c]);
    unpack_stream(field, elems)
}

fn unpack_stream<I: Iterator<Item = FieldElement>>(field: &Field, mut elems: I) -> Result<Vec<u8>, HeccError> {
    let bits = field.payload_bits();
    let limit = 1u64 << bits;
    let mut acc: u128 = 0;
    let mut filled: u32 = 0;
    let mut next_byte = |elems: &mut I| -> Result<u8, HeccError> {
        while filled < 8 {
            let e = elems.next().ok_or(HeccError::CorruptFraming)?;
            if e.value() >= limit {
                return Err(HeccError::CorruptFraming);
            }
            acc = (acc << bits) | e.value() as u128;
            filled += bits;
        }
        let b = (acc >> (filled - 8)) as u8;
        filled -= 8;
        acc &= (1u128 << filled) - 1;
        Ok(b)
    };
    let mut prefix = [0u8; LENGTH_PREFIX];
    for b in prefix.iter_mut() {
        *b = next_byte(&mut elems)?;
    }
    let len = u32::from_be_bytes(prefix) as usize;
    let mut out = Vec::with_capacity(len.min(1 << 20));
    for _ in 0..len {
        out.push(next_byte(&mut elems)?);
    }
    Ok(out)
}

/// Convenience wrapper: recover `(m, r)` for one row.
pub fn split_coefficients(params: HeccParams, poly: Polynomial) -> (Vec<FieldElement>, Vec<FieldElement>) {
    let mut m = poly.into_coefficients();
    let r = m.split_off(params.k);
    (m, r)
}
