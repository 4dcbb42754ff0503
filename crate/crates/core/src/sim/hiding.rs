//! Paired-execution hiding experiment.
//!
//! Each pair runs the same configuration twice, once with challenge
//! transaction `tx_0` and once with `tx_1` (equal lengths), input at the
//! first honest proposer of the challenge slot. The adversary's view is cut
//! at the first consensus output that makes the challenge batch available;
//! after that point its contents are bound to be revealed anyway. The views
//! are then compared statistically.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use super::config::{ConfigError, SimConfig, TxInput};
use super::engine::run_execution;
use super::trace::{ExecutionTrace, TracePayload};
use crate::field::{interpolate, Field, FieldElement};
use crate::hecc::{pack, Hecc};
use crate::protocol::types::encode_batch;
use crate::protocol::{Block, Message, NodeId, ProtocolParams, RoleSchedule, Transaction};

#[derive(Debug, Error)]
pub enum HidingError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("challenge transactions must have equal length")]
    UnequalChallenge,
    #[error("pair {0}: views are not comparable ({1})")]
    Mismatch(usize, String),
    #[error("no honest proposer in the challenge slot")]
    NoHonestProposer,
    #[error("no pairs")]
    Empty,
}

#[derive(Debug, Clone)]
pub struct HidingExperiment {
    pub base: SimConfig,
    pub challenge: [Vec<u8>; 2],
    pub slot: u64,
}

/// Relay index, shred column and mask element of one relay.
pub type Share = (usize, Vec<FieldElement>, FieldElement);

/// `(time, kind, from, to, length)` of one delivery.
pub type SkeletonEntry = (u64, &'static str, Option<NodeId>, Option<NodeId>, usize);

/// What the adversary saw of the challenge batch before the cut-point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HidingView {
    pub proposer: NodeId,
    pub cut: u64,
    /// `(time, kind, from, to, length)` of every delivery to a corrupted
    /// node up to the cut.
    pub skeleton: Vec<SkeletonEntry>,
    /// Per corrupted node (ascending): relay index, shred column and mask
    /// element received from the challenge proposer. `None` if nothing
    /// arrived.
    pub shares: Vec<(NodeId, Option<Share>)>,
}

impl HidingExperiment {
    pub fn new(base: SimConfig, challenge: [Vec<u8>; 2]) -> Result<Self, HidingError> {
        if challenge[0].len() != challenge[1].len() {
            return Err(HidingError::UnequalChallenge);
        }
        Ok(HidingExperiment { base, challenge, slot: 1 })
    }

    /// Ten nodes, all relays, over F_97 so that `K = T = 2`. Nodes
    /// `0..corrupted` are corrupted but follow the protocol.
    pub fn small(corrupted: u32, seed: u64, challenge: [Vec<u8>; 2]) -> Result<Self, HidingError> {
        let mut params = ProtocolParams::with_defaults(10, 10);
        params.field = Field::new(97).expect("97 is prime");
        let mut base = SimConfig::new(params, 1, seed);
        for node in 0..corrupted {
            base.corrupt(node, Vec::new());
        }
        Self::new(base, challenge)
    }

    /// Configuration for pair `pair` with challenge bit `b`.
    pub fn config(&self, pair: u64, b: usize) -> Result<(SimConfig, NodeId), HidingError> {
        let mut c = self.base.clone();
        c.seed = self.base.seed.wrapping_add(pair);
        c.encoding_salt = 2 * pair + b as u64;
        let p = &c.params;
        let roles = RoleSchedule::with_overrides(p.n, p.n_prop, p.n_relay, c.seed, c.role_overrides.clone());
        let proposer = roles
            .get(self.slot)
            .proposers
            .iter()
            .copied()
            .find(|&q| c.is_honest(q))
            .ok_or(HidingError::NoHonestProposer)?;
        c.workload.push(TxInput {
            t_ms: p.slot_start(self.slot).saturating_sub(1),
            node: proposer,
            payload: self.challenge[b].clone(),
        });
        Ok((c, proposer))
    }

    pub fn run_pair(&self, pair: u64) -> Result<[HidingView; 2], HidingError> {
        let mut views = Vec::with_capacity(2);
        for b in 0..2 {
            let (config, proposer) = self.config(pair, b)?;
            let trace = run_execution(&config)?;
            views.push(extract_view(&trace, proposer, self.slot));
        }
        Ok([views.remove(0), views.remove(0)])
    }
}

/// First output time at which a block deems the proposer available in the
/// slot, or the end of time if none does.
pub fn cut_point(trace: &ExecutionTrace, proposer: NodeId, slot: u64) -> u64 {
    let thr = trace.params.thr_avail();
    trace
        .events
        .iter()
        .filter(|e| e.slot == slot)
        .find_map(|e| match &e.payload {
            TracePayload::AbOutput(Some(bytes)) => {
                let block = Block::from_bytes(bytes)?;
                let mut commitments = BTreeMap::new();
                for att in block.entries.values() {
                    if let Some((c, _)) = att.entries.get(&proposer) {
                        *commitments.entry(*c).or_insert(0usize) += 1;
                    }
                }
                (commitments.len() == 1 && commitments.values().all(|&n| n >= thr)).then_some(e.t)
            }
            _ => None,
        })
        .unwrap_or(u64::MAX)
}

pub fn extract_view(trace: &ExecutionTrace, proposer: NodeId, slot: u64) -> HidingView {
    let cut = cut_point(trace, proposer, slot);
    let mut skeleton = Vec::new();
    let mut shares: BTreeMap<NodeId, Option<Share>> =
        trace.corrupted.iter().map(|&c| (c, None)).collect();
    for e in trace.adversary_view().filter(|e| e.t <= cut) {
        skeleton.push((e.t, e.kind(), e.from, e.to, e.bytes(&trace.params).len()));
        if let TracePayload::Msg(m) = &e.payload {
            if let Message::Shred(p) | Message::Release(p) = m.as_ref() {
                if p.proposer == proposer && p.slot == slot {
                    let to = e.to.expect("adversary view has receivers");
                    shares.insert(to, Some((p.index, p.shred.clone(), p.mask)));
                }
            }
        }
    }
    HidingView {
        proposer,
        cut,
        skeleton,
        shares: shares.into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HidingReport {
    pub passed: bool,
    pub pairs: usize,
    pub tests: usize,
    /// Smallest p-value over all marginal and joint tests.
    pub min_p_value: f64,
    /// Bonferroni-corrected per-test threshold.
    pub threshold: f64,
    /// Pairs whose non-share traffic differed.
    pub skeleton_mismatches: usize,
}

/// Two-sample chi-square homogeneity test on categorical samples.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> f64 {
    let mut counts: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for &x in a {
        counts.entry(x).or_default().0 += 1.0;
    }
    for &x in b {
        counts.entry(x).or_default().1 += 1.0;
    }
    if counts.len() < 2 {
        return 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let stat: f64 = counts
        .values()
        .map(|&(ca, cb)| {
            let col = ca + cb;
            let ea = col * na / total;
            let eb = col * nb / total;
            (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb
        })
        .sum();
    let df = (counts.len() - 1) as f64;
    ChiSquared::new(df).map_or(0.0, |d| d.sf(stat))
}

/// Tests, per corrupted node and row, that shred and mask values are
/// identically distributed under both challenge bits, plus a coarse joint
/// test on the first two corrupted nodes' first-row shreds.
pub fn check_hiding(field: &Field, pairs: &[[HidingView; 2]], alpha: f64) -> Result<HidingReport, HidingError> {
    if pairs.is_empty() {
        return Err(HidingError::Empty);
    }
    let shape = |v: &HidingView| -> Vec<Option<usize>> {
        v.shares.iter().map(|(_, s)| s.as_ref().map(|s| s.1.len())).collect()
    };
    let reference = shape(&pairs[0][0]);
    let mut skeleton_mismatches = 0;
    for (i, [v0, v1]) in pairs.iter().enumerate() {
        if shape(v0) != reference || shape(v1) != reference {
            return Err(HidingError::Mismatch(i, "share shapes differ".into()));
        }
        let ids = |v: &HidingView| v.shares.iter().map(|s| s.0).collect::<Vec<_>>();
        if ids(v0) != ids(v1) {
            return Err(HidingError::Mismatch(i, "corrupted sets differ".into()));
        }
        if v0.skeleton != v1.skeleton {
            skeleton_mismatches += 1;
        }
    }
    let mut samples: Vec<[Vec<u64>; 2]> = Vec::new();
    for (slot, s) in reference.iter().enumerate() {
        let Some(rows) = *s else { continue };
        let column = |b: usize, f: &dyn Fn(&Share) -> u64| -> Vec<u64> {
            pairs
                .iter()
                .map(|p| f(p[b].shares[slot].1.as_ref().expect("shape checked")))
                .collect()
        };
        for row in 0..rows {
            samples.push([0, 1].map(|b| column(b, &|s| s.1[row].value())));
        }
        samples.push([0, 1].map(|b| column(b, &|s| s.2.value())));
    }
    let present: Vec<usize> = reference.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| i).collect();
    if present.len() >= 2 {
        let bins = 8u64;
        let p = field.modulus();
        let joint = |b: usize| -> Vec<u64> {
            pairs
                .iter()
                .map(|pair| {
                    let x = pair[b].shares[present[0]].1.as_ref().expect("present").1[0].value();
                    let y = pair[b].shares[present[1]].1.as_ref().expect("present").1[0].value();
                    (x * bins / p) * bins + y * bins / p
                })
                .collect()
        };
        samples.push([joint(0), joint(1)]);
    }
    let tests = samples.len();
    let threshold = alpha / tests.max(1) as f64;
    let min_p_value = samples
        .iter()
        .map(|[a, b]| chi_square_two_sample(a, b))
        .fold(1.0f64, f64::min);
    Ok(HidingReport {
        passed: min_p_value >= threshold && skeleton_mismatches == 0,
        pairs: pairs.len(),
        tests,
        min_p_value,
        threshold,
        skeleton_mismatches,
    })
}

/// Guesses the challenge bit from the adversary's shares of the challenge
/// batch: assuming bit 0, it strips the hypothesized message coefficients
/// from each row and checks whether the remaining `T + 1` or more values are
/// consistent with the randomness part of a codeword. Returns 0 on
/// consistency, 1 otherwise. With at most `T` shares every hypothesis is
/// consistent and the guess is always 0.
pub fn distinguish(hecc: &Hecc, hypothesis_batch: &[u8], view: &HidingView) -> usize {
    let field = hecc.field();
    let params = hecc.params();
    let shares: Vec<&Share> = view.shares.iter().filter_map(|s| s.1.as_ref()).collect();
    if shares.len() <= params.t {
        return 0;
    }
    let rows = shares[0].1.len();
    let packed = pack(field, hypothesis_batch, rows * params.k);
    for row in 0..rows {
        let m: Vec<FieldElement> = (0..params.k).map(|c| packed[c * rows + row]).collect();
        // z_i = (y_i - sum_k m_k a^k) / a^K must lie on a polynomial of degree < T
        let points: Vec<(FieldElement, FieldElement)> = shares
            .iter()
            .map(|(index, column, _)| {
                let a = field.elem(*index as u64);
                let mut known = field.zero();
                let mut pw = field.one();
                for &mk in &m {
                    known = field.add(known, field.mul(mk, pw));
                    pw = field.mul(pw, a);
                }
                let z = field.div(field.sub(column[row], known), pw).expect("alpha is nonzero");
                (a, z)
            })
            .collect();
        let (fit, rest) = points.split_at(params.t);
        let consistent = if params.t == 0 {
            rest.iter().all(|(_, z)| z.is_zero())
        } else {
            match interpolate(field, fit, params.t - 1) {
                Ok(g) => rest.iter().all(|(x, z)| g.eval(field, *x) == *z),
                Err(_) => false,
            }
        };
        if !consistent {
            return 1;
        }
    }
    0
}

/// Empirical advantage `P[guess 0 | b = 0] - P[guess 0 | b = 1]`.
pub fn distinguisher_advantage(hecc: &Hecc, challenge0: &Transaction, pairs: &[[HidingView; 2]]) -> f64 {
    let batch = encode_batch([challenge0]);
    let n = pairs.len().max(1) as f64;
    let zero_given = |b: usize| pairs.iter().filter(|p| distinguish(hecc, &batch, &p[b]) == 0).count() as f64 / n;
    zero_given(0) - zero_given(1)
}
