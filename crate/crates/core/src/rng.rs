//! Named RNG streams derived from a run seed.

use rand::SeedableRng;
use sha2::{Digest, Sha256};

/// Seeds an RNG from `H(seed ‖ label ‖ index)`, giving independent streams
/// for each purpose.
pub fn derive_rng<R: SeedableRng<Seed = [u8; 32]>>(seed: u64, label: &str, index: u64) -> R {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update((label.len() as u32).to_be_bytes());
    h.update(label.as_bytes());
    h.update(index.to_be_bytes());
    R::from_seed(h.finalize().into())
}
