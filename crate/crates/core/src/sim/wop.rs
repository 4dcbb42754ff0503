//! Empirical check of the relay-sampling concentration bound: how often a
//! sampled relay committee contains at least a fifth Byzantine members.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{Binomial, Discrete};

use crate::analysis::{binomial_tail_at_least, to_f64};
use crate::protocol::{Fraction, RoleSchedule};
use crate::rng::derive_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct WopReport {
    pub slots: u64,
    /// Slots with at least `ceil(n_relay / 5)` corrupted relays.
    pub heavy: u64,
    /// Exact per-slot probability of a heavy committee.
    pub expected_rate: f64,
    /// Two-sided exact binomial test of `heavy` against `expected_rate`.
    pub p_value: f64,
}

impl WopReport {
    pub fn consistent(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Two-sided binomial test: total mass of outcomes no more likely than the
/// observed one.
pub fn binomial_test(successes: u64, trials: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if successes == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if successes == trials { 1.0 } else { 0.0 };
    }
    let d = Binomial::new(p, trials).expect("valid binomial");
    let observed = d.pmf(successes) * (1.0 + 1e-7);
    (0..=trials).map(|k| d.pmf(k)).filter(|&m| m <= observed).sum::<f64>().min(1.0)
}

/// Samples `slots` committees. Every node is corrupted independently with
/// probability `beta`, fresh for each slot, so the corrupted relay count is
/// `Binomial(n_relay, beta)`.
pub fn wop_face_check(n: usize, n_relay: usize, beta: Fraction, slots: u64, seed: u64) -> WopReport {
    let roles = RoleSchedule::new(n, n, n_relay, seed);
    let (num, den) = (*beta.numer() as u32, *beta.denom() as u32);
    let threshold = (n_relay as u64).div_ceil(5);
    let mut heavy = 0;
    for slot in 1..=slots {
        let mut rng: ChaCha20Rng = derive_rng(seed, "wop/corrupt", slot);
        let corrupt: Vec<bool> = (0..n).map(|_| rng.gen_ratio(num, den)).collect();
        let count = roles.get(slot).relays.iter().filter(|&&r| corrupt[r as usize]).count() as u64;
        if count >= threshold {
            heavy += 1;
        }
    }
    let beta = BigRational::new(BigInt::from(num), BigInt::from(den));
    let expected_rate = to_f64(&binomial_tail_at_least(n_relay as u64, &beta, threshold).expect("beta is a probability"));
    WopReport {
        slots,
        heavy,
        expected_rate,
        p_value: binomial_test(heavy, slots, expected_rate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_test_extremes() {
        assert!((binomial_test(50, 100, 0.5) - 1.0).abs() < 1e-9);
        assert!(binomial_test(90, 100, 0.5) < 1e-10);
        assert_eq!(binomial_test(0, 10, 0.0), 1.0);
        assert_eq!(binomial_test(1, 10, 0.0), 0.0);
    }

    #[test]
    fn face_check_is_consistent() {
        let r = wop_face_check(100, 50, Fraction::new(1, 10), 2000, 3);
        assert!(r.expected_rate > 0.01 && r.expected_rate < 0.05, "{r:?}");
        assert!(r.consistent(0.01), "{r:?}");
    }
}
