//! Signatures over domain-separated protocol contexts.
//!
//! Every signed object is wrapped as `tag ‖ 0x00 ‖ slot_be64 ‖ body` before
//! signing, so a signature produced for one object kind never verifies as
//! another. Ed25519 is the scheme; keys derive deterministically from a
//! 32-byte seed so simulations replay exactly.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use sha2::{Digest as _, Sha256};

pub const SIGNATURE_LEN: usize = 64;
pub const PUBLIC_KEY_LEN: usize = 32;

/// Object kinds that get signed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SigTag {
    Commit,
    Attest,
    Block,
}

impl SigTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SigTag::Commit => "MCP/commit",
            SigTag::Attest => "MCP/attest",
            SigTag::Block => "MCP/block",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigningContext<'a> {
    pub tag: SigTag,
    pub slot: u64,
    pub body: &'a [u8],
}

impl<'a> SigningContext<'a> {
    pub fn new(tag: SigTag, slot: u64, body: &'a [u8]) -> Self {
        SigningContext { tag, slot, body }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tag = self.tag.as_str().as_bytes();
        let mut out = Vec::with_capacity(tag.len() + 9 + self.body.len());
        out.extend_from_slice(tag);
        out.push(0);
        out.extend_from_slice(&self.slot.to_be_bytes());
        out.extend_from_slice(self.body);
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig({}..)", hex::encode(&self.0[..4]))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey {
    bytes: [u8; PUBLIC_KEY_LEN],
    key: VerifyingKey,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pk({}..)", hex::encode(&self.bytes[..4]))
    }
}

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.bytes
    }

    pub fn from_bytes(bytes: &[u8; PUBLIC_KEY_LEN]) -> Option<Self> {
        VerifyingKey::from_bytes(bytes).ok().map(|key| PublicKey { bytes: *bytes, key })
    }
}

#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: PublicKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }
}

pub fn keygen(seed: &[u8; 32]) -> KeyPair {
    let signing = SigningKey::from_bytes(seed);
    let key = signing.verifying_key();
    KeyPair {
        public: PublicKey {
            bytes: key.to_bytes(),
            key,
        },
        signing,
    }
}

pub fn sign(keys: &KeyPair, ctx: &SigningContext<'_>) -> Signature {
    Signature(keys.signing.sign(&ctx.to_bytes()).to_bytes())
}

pub fn verify(pk: &PublicKey, ctx: &SigningContext<'_>, sig: &Signature) -> bool {
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    pk.key.verify(&ctx.to_bytes(), &sig).is_ok()
}

/// Something that can check signatures. Protocol code is written against
/// this so a simulation can share one memoizing verifier across its nodes.
pub trait SigVerifier {
    fn verify(&self, pk: &PublicKey, ctx: &SigningContext<'_>, sig: &Signature) -> bool;
}

/// Plain, uncached verification.
#[derive(Debug, Default, Clone, Copy)]
pub struct DirectVerifier;

impl SigVerifier for DirectVerifier {
    fn verify(&self, pk: &PublicKey, ctx: &SigningContext<'_>, sig: &Signature) -> bool {
        verify(pk, ctx, sig)
    }
}

/// Memoizes verification results keyed by a hash of `(pk, context, sig)`.
/// Verification is a pure function, so sharing the cache between simulated
/// nodes does not change any node's outcome.
#[derive(Debug, Default)]
pub struct VerifyCache {
    seen: RefCell<HashMap<[u8; 32], bool>>,
}

impl VerifyCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.seen.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.borrow().is_empty()
    }
}

impl SigVerifier for VerifyCache {
    fn verify(&self, pk: &PublicKey, ctx: &SigningContext<'_>, sig: &Signature) -> bool {
        let mut h = Sha256::new();
        h.update(pk.as_bytes());
        h.update(sig.0);
        h.update(ctx.to_bytes());
        let key: [u8; 32] = h.finalize().into();
        if let Some(&hit) = self.seen.borrow().get(&key) {
            return hit;
        }
        let ok = verify(pk, ctx, sig);
        self.seen.borrow_mut().insert(key, ok);
        ok
    }
}
