//! Exhaustive small-field codec and commitment suites, plus pinned golden
//! values for cross-build regression checks.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest as _, Sha256};

use crate::analysis::{binomial_tail, parse_decimal, to_f64};
use crate::commitment::{vc_verify, CommitmentTree};
use crate::field::{Field, FieldElement};
use crate::hecc::{Hecc, HeccParams};
use crate::protocol::ProtocolParams;
use crate::sig::keygen;
use crate::sim::{run_execution, SimConfig, TxInput};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: String,
    pub checks: u64,
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        SuiteResult {
            name: name.to_string(),
            ..Default::default()
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 20 {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "ok" } else { "FAILED" };
        write!(f, "{}: {} checks, {} failures, {verdict}", self.name, self.checks, self.failures.len())?;
        for fail in &self.failures {
            write!(f, "\n  {fail}")?;
        }
        Ok(())
    }
}

fn all_vectors(field: &Field, len: usize) -> Vec<Vec<FieldElement>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v: Vec<FieldElement>| {
                (0..field.modulus()).map(move |x| {
                    let mut w = v.clone();
                    w.push(field.elem(x));
                    w
                })
            })
            .collect();
    }
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut with: Vec<Vec<usize>> = subsets(n - 1, k - 1);
    for s in &mut with {
        s.push(n);
    }
    let mut out = subsets(n - 1, k);
    out.extend(with);
    out
}

/// Over every message and randomness vector: each `K + T` subset of shreds
/// decodes back; for each fixed message, the map from randomness to any `T`
/// shreds is a bijection; the map from `(m, r)` to any `K + T` shreds is a
/// bijection.
pub fn hecc_exhaustive(p: u64, k: usize, t: usize, n: usize) -> SuiteResult {
    let mut res = SuiteResult::new(&format!("hecc exhaustive p={p} K={k} T={t} N={n}"));
    let field = match Field::new(p) {
        Ok(f) => f,
        Err(e) => {
            res.check(false, || e.to_string());
            return res;
        }
    };
    let hecc = match Hecc::new(field, HeccParams::new(n, k, t)) {
        Ok(h) => h,
        Err(e) => {
            res.check(false, || e.to_string());
            return res;
        }
    };
    let messages = all_vectors(&field, k);
    let randomness = all_vectors(&field, t);
    let full = subsets(n, k + t);
    let hiding = subsets(n, t);
    let mut images: Vec<HashSet<Vec<u64>>> = vec![HashSet::new(); full.len()];
    for m in &messages {
        let mut hidden: Vec<HashSet<Vec<u64>>> = vec![HashSet::new(); hiding.len()];
        for r in &randomness {
            let code = hecc.encode(m, r).expect("lengths match");
            for (si, set) in full.iter().enumerate() {
                let pairs: Vec<(FieldElement, usize)> = set.iter().map(|&i| (code[i - 1], i)).collect();
                let decoded = hecc.decode(&pairs);
                res.check(decoded.as_ref().ok() == Some(&(m.clone(), r.clone())), || {
                    format!("decode m={m:?} r={r:?} subset={set:?}")
                });
                images[si].insert(set.iter().map(|&i| code[i - 1].value()).collect());
            }
            for (si, set) in hiding.iter().enumerate() {
                hidden[si].insert(set.iter().map(|&i| code[i - 1].value()).collect());
            }
        }
        for (si, set) in hiding.iter().enumerate() {
            res.check(hidden[si].len() == randomness.len(), || {
                format!("hiding: m={m:?} indices={set:?} hit {} of {}", hidden[si].len(), randomness.len())
            });
        }
    }
    let total = messages.len() * randomness.len();
    for (si, set) in full.iter().enumerate() {
        res.check(images[si].len() == total, || {
            format!("uniformity: indices={set:?} hit {} of {total}", images[si].len())
        });
    }
    res
}

/// Round trips at several lengths, random tampering of every opening field
/// and the structure of the 8-leaf example tree.
pub fn commitment_suite(seed: u64, tamper_cases: usize) -> SuiteResult {
    let mut res = SuiteResult::new("commitment");
    let field = Field::mersenne61();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for len in [1usize, 2, 8, 13] {
        let values: Vec<Vec<FieldElement>> = (0..len).map(|_| field.random_vec(&mut rng, 2)).collect();
        let masks = field.random_vec(&mut rng, len);
        let tree = CommitmentTree::build(&field, &values, &masks).expect("nonempty");
        let c = tree.commitment();
        for i in 1..=len {
            let o = tree.open(i).expect("in range");
            res.check(vc_verify(&field, &c, i, &o.value, o.randomness, &o.witness), || {
                format!("round trip L={len} i={i}")
            });
        }
    }
    let len = 13;
    let values: Vec<Vec<FieldElement>> = (0..len).map(|_| field.random_vec(&mut rng, 3)).collect();
    let masks = field.random_vec(&mut rng, len);
    let tree = CommitmentTree::build(&field, &values, &masks).expect("nonempty");
    let c = tree.commitment();
    for case in 0..tamper_cases {
        let i = rng.gen_range(1..=len);
        let mut o = tree.open(i).expect("in range");
        let mut index = i;
        match rng.gen_range(0..4) {
            0 => {
                let j = rng.gen_range(0..o.value.len());
                o.value[j] = field.add(o.value[j], field.elem(rng.gen_range(1..field.modulus())));
            }
            1 => o.randomness = field.add(o.randomness, field.elem(rng.gen_range(1..field.modulus()))),
            2 => {
                let j = rng.gen_range(0..o.witness.len());
                o.witness[j][rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8);
            }
            _ => index = (i % len) + 1,
        }
        res.check(!vc_verify(&field, &c, index, &o.value, o.randomness, &o.witness), || {
            format!("tamper case {case} accepted")
        });
    }
    res
}

/// Name-value pairs that must not change between builds.
pub fn golden_values() -> BTreeMap<&'static str, String> {
    let mut g = BTreeMap::new();
    let tail = binomial_tail(512, &parse_decimal("0.15").expect("literal"), &parse_decimal("128").expect("literal"))
        .expect("valid probability");
    g.insert("binomial_tail_512_0.15_128", format!("{:.12e}", to_f64(&tail)));

    let f97 = Field::new(97).expect("prime");
    let hecc = Hecc::new(f97, HeccParams::new(10, 2, 2)).expect("valid");
    let code = hecc
        .encode(&[f97.elem(1), f97.elem(2)], &[f97.elem(3), f97.elem(4)])
        .expect("lengths match");
    g.insert("hecc_p97_codeword", code.iter().map(|e| e.value().to_string()).collect::<Vec<_>>().join(" "));

    let f7 = Field::new(7).expect("prime");
    let rows: Vec<Vec<FieldElement>> = [1, 2, 3].iter().map(|&v| vec![f7.elem(v)]).collect();
    let masks = [f7.elem(0), f7.elem(0), f7.elem(6)];
    let root = *CommitmentTree::build(&f7, &rows, &masks).expect("nonempty").commitment().root();
    g.insert("vc_root_p7", hex::encode(root));

    g.insert("ed25519_pk_seed0", hex::encode(keygen(&[0u8; 32]).public().as_bytes()));

    let mut config = SimConfig::new(ProtocolParams::with_defaults(10, 5), 3, 1);
    config.workload = (0..5)
        .map(|i| TxInput {
            t_ms: 50 * i as u64,
            node: i,
            payload: format!("tx{i}").into_bytes(),
        })
        .collect();
    let trace = run_execution(&config).expect("valid config");
    g.insert("honest_trace_sha256", hex::encode(Sha256::digest(trace.to_jsonl())));
    g
}

/// Parses `name = value` lines (blank lines and `#` comments ignored).
pub fn parse_golden(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn render_golden(values: &BTreeMap<&'static str, String>) -> String {
    values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn check_golden(expected: &BTreeMap<String, String>) -> SuiteResult {
    let mut res = SuiteResult::new("golden");
    let actual = golden_values();
    for (name, value) in &actual {
        let want = expected.get(*name);
        res.check(want == Some(value), || match want {
            Some(w) => format!("{name}: expected {w}, computed {value}"),
            None => format!("{name}: missing from golden file"),
        });
    }
    for name in expected.keys() {
        res.check(actual.contains_key(name.as_str()), || format!("{name}: unknown golden entry"));
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_sorted_and_complete() {
        let s = subsets(4, 2);
        assert_eq!(s.len(), 6);
        assert!(s.iter().all(|x| x.windows(2).all(|w| w[0] < w[1])));
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn tiny_exhaustive_suites_pass() {
        let r = hecc_exhaustive(5, 1, 1, 3);
        assert!(r.passed(), "{r}");
        assert_eq!(r.checks, 25 * 3 + 5 * 3 + 3);
        let r = hecc_exhaustive(5, 1, 2, 4);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn golden_round_trip_and_corruption() {
        let text = render_golden(&golden_values());
        assert!(check_golden(&parse_golden(&text)).passed());
        let broken = text.replacen("vc_root_p7 = ", "vc_root_p7 = 00", 1);
        assert!(!check_golden(&parse_golden(&broken)).passed());
    }
}
