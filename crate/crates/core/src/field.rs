//! Prime-field arithmetic and dense polynomials over it.
//!
//! The modulus is a runtime value so that the same code serves the production
//! field (the Mersenne prime 2^61 - 1) and the tiny fields used by the
//! exhaustive test suites. Elements are always held in canonical form.

use std::fmt;

use rand::Rng;
use thiserror::Error;

/// Serialized width of every field element, regardless of modulus.
pub const ENCODING_WIDTH: usize = 8;

/// The default production modulus, 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is out of range (need 2 <= p < 2^63)")]
    ModulusOutOfRange(u64),
    #[error("inversion of zero")]
    InverseOfZero,
    #[error("interpolation needs exactly {expected} points, got {got}")]
    PointCount { expected: usize, got: usize },
    #[error("duplicate x-coordinate {0} in interpolation input")]
    DuplicatePoint(u64),
    #[error("evaluation domain of size {size} does not fit field of order {modulus}")]
    DomainTooLarge { size: usize, modulus: u64 },
}

/// Canonical representative of a residue class, always `< p`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Arithmetic operations exposed through [`Field::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    /// Unary; the second operand is ignored.
    Inv,
    /// Unary; the second operand is ignored.
    Neg,
}

/// A prime field `F_p` together with its byte-packing parameters.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    modulus: u64,
    payload_bits: u32,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.modulus)
    }
}

impl Default for Field {
    fn default() -> Self {
        Field::mersenne61()
    }
}

impl Field {
    pub fn new(modulus: u64) -> Result<Self, FieldError> {
        if !(2..(1 << 63)).contains(&modulus) {
            return Err(FieldError::ModulusOutOfRange(modulus));
        }
        if !is_prime(modulus) {
            return Err(FieldError::NotPrime(modulus));
        }
        let bit_len = 64 - modulus.leading_zeros();
        // Largest whole-byte width strictly below the modulus bit length; tiny
        // fields fall back to sub-byte packing so they can still carry payloads.
        let payload_bits = if bit_len > 8 {
            8 * ((bit_len - 1) / 8)
        } else {
            bit_len - 1
        };
        Ok(Field {
            modulus,
            payload_bits,
        })
    }

    pub fn mersenne61() -> Self {
        Field::new(MERSENNE_61).expect("2^61 - 1 is prime")
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Bits of payload packed into one element. Always `< bit_len(p)`, so
    /// every packed value is a valid canonical element.
    pub fn payload_bits(&self) -> u32 {
        self.payload_bits
    }

    /// Whole bytes per element, when packing is byte aligned.
    pub fn bytes_per_element(&self) -> usize {
        (self.payload_bits / 8) as usize
    }

    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement(v % self.modulus)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(1 % self.modulus)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a.0 + b.0;
        FieldElement(if s >= self.modulus { s - self.modulus } else { s })
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(a.0 - b.0)
        } else {
            FieldElement(a.0 + self.modulus - b.0)
        }
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.0 == 0 {
            a
        } else {
            FieldElement(self.modulus - a.0)
        }
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(((a.0 as u128 * b.0 as u128) % self.modulus as u128) as u64)
    }

    pub fn pow(&self, base: FieldElement, mut exp: u64) -> FieldElement {
        let mut acc = self.one();
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::InverseOfZero);
        }
        let (mut old_r, mut r) = (a.0 as i128, self.modulus as i128);
        let (mut old_s, mut s) = (1i128, 0i128);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        debug_assert_eq!(old_r, 1);
        Ok(FieldElement(old_s.rem_euclid(self.modulus as i128) as u64))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn apply(
        &self,
        op: FieldOp,
        a: FieldElement,
        b: FieldElement,
    ) -> Result<FieldElement, FieldError> {
        Ok(match op {
            FieldOp::Add => self.add(a, b),
            FieldOp::Sub => self.sub(a, b),
            FieldOp::Mul => self.mul(a, b),
            FieldOp::Inv => self.inv(a)?,
            FieldOp::Neg => self.neg(a),
        })
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.gen_range(0..self.modulus))
    }

    pub fn random_vec<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vec<FieldElement> {
        (0..len).map(|_| self.random(rng)).collect()
    }

    /// Fixed-width big-endian encoding. This is the byte form that gets hashed
    /// and signed everywhere.
    pub fn encode(&self, a: FieldElement) -> [u8; ENCODING_WIDTH] {
        a.0.to_be_bytes()
    }

    pub fn encode_into(&self, a: FieldElement, out: &mut Vec<u8>) {
        out.extend_from_slice(&a.0.to_be_bytes());
    }

    /// Rejects non-canonical encodings.
    pub fn decode(&self, bytes: &[u8]) -> Option<FieldElement> {
        let arr: [u8; ENCODING_WIDTH] = bytes.try_into().ok()?;
        let v = u64::from_be_bytes(arr);
        (v < self.modulus).then_some(FieldElement(v))
    }
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let d_shift = (n - 1).trailing_zeros();
    let d = (n - 1) >> d_shift;
    'witness: for &a in &BASES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..d_shift {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Dense polynomial, lowest-degree coefficient first. The length is the
/// degree bound plus one; trailing zeros are kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<FieldElement>) -> Self {
        Polynomial { coeffs }
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<FieldElement> {
        self.coeffs
    }

    pub fn degree_bound(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, field: &Field, x: FieldElement) -> FieldElement {
        self.coeffs
            .iter()
            .rev()
            .fold(field.zero(), |acc, &c| field.add(field.mul(acc, x), c))
    }
}

pub fn poly_eval(field: &Field, f: &Polynomial, x: FieldElement) -> FieldElement {
    f.eval(field, x)
}

/// Evaluation points `alpha_1..alpha_N` with `alpha_i = i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalDomain {
    points: Vec<FieldElement>,
}

impl EvalDomain {
    pub fn canonical(field: &Field, size: usize) -> Result<Self, FieldError> {
        if size as u128 > field.modulus() as u128 {
            return Err(FieldError::DomainTooLarge {
                size,
                modulus: field.modulus(),
            });
        }
        Ok(EvalDomain {
            points: (1..=size as u64).map(|i| field.elem(i)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `alpha_i` for a 1-based index.
    pub fn point(&self, index: usize) -> Option<FieldElement> {
        index.checked_sub(1).and_then(|i| self.points.get(i)).copied()
    }

    pub fn points(&self) -> &[FieldElement] {
        &self.points
    }
}

/// Lagrange basis for a fixed set of distinct x-coordinates, in coefficient
/// form. Building it once lets many rows sharing the same x-set be
/// interpolated with a matrix-vector product each.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    field: Field,
    /// `basis[j]` holds the coefficients of `l_j(X)`.
    basis: Vec<Vec<FieldElement>>,
}

impl LagrangeBasis {
    pub fn new(field: &Field, xs: &[FieldElement]) -> Result<Self, FieldError> {
        let n = xs.len();
        for (i, x) in xs.iter().enumerate() {
            if xs[..i].contains(x) {
                return Err(FieldError::DuplicatePoint(x.value()));
            }
        }
        // master(X) = prod_j (X - x_j), degree n.
        let mut master = vec![field.zero(); n + 1];
        master[0] = field.one();
        for (deg, &x) in xs.iter().enumerate() {
            for k in (0..=deg + 1).rev() {
                let shifted = if k > 0 { master[k - 1] } else { field.zero() };
                master[k] = field.sub(shifted, field.mul(x, master[k]));
            }
        }
        let mut basis = Vec::with_capacity(n);
        for (j, &xj) in xs.iter().enumerate() {
            // master / (X - x_j) by synthetic division.
            let mut quot = vec![field.zero(); n];
            let mut carry = field.zero();
            for k in (0..n).rev() {
                carry = field.add(master[k + 1], field.mul(carry, xj));
                quot[k] = carry;
            }
            let denom = xs
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .fold(field.one(), |acc, (_, &xk)| field.mul(acc, field.sub(xj, xk)));
            let scale = field.inv(denom)?;
            basis.push(quot.into_iter().map(|c| field.mul(c, scale)).collect());
        }
        Ok(LagrangeBasis {
            field: *field,
            basis,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Coefficients of the unique polynomial of degree `< len` through
    /// `(x_j, ys[j])`.
    pub fn interpolate(&self, ys: &[FieldElement]) -> Result<Polynomial, FieldError> {
        if ys.len() != self.basis.len() {
            return Err(FieldError::PointCount {
                expected: self.basis.len(),
                got: ys.len(),
            });
        }
        let f = &self.field;
        let mut coeffs = vec![f.zero(); self.basis.len()];
        for (lj, &yj) in self.basis.iter().zip(ys) {
            if yj.is_zero() {
                continue;
            }
            for (c, &b) in coeffs.iter_mut().zip(lj) {
                *c = f.add(*c, f.mul(b, yj));
            }
        }
        Ok(Polynomial::new(coeffs))
    }
}

/// Unique polynomial of degree at most `degree_bound` through the given
/// points. Exactly `degree_bound + 1` points with distinct x are required.
pub fn interpolate(
    field: &Field,
    points: &[(FieldElement, FieldElement)],
    degree_bound: usize,
) -> Result<Polynomial, FieldError> {
    if points.len() != degree_bound + 1 {
        return Err(FieldError::PointCount {
            expected: degree_bound + 1,
            got: points.len(),
        });
    }
    let xs: Vec<_> = points.iter().map(|p| p.0).collect();
    let ys: Vec<_> = points.iter().map(|p| p.1).collect();
    LagrangeBasis::new(field, &xs)?.interpolate(&ys)
}
