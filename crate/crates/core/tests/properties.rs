use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mcp_core::commitment::CommitmentTree;
use mcp_core::field::{interpolate, is_prime, Field, FieldElement, Polynomial};
use mcp_core::hecc::{Hecc, HeccParams};
use mcp_core::protocol::{Fraction, ProtocolParams};
use mcp_core::selftest::{commitment_suite, hecc_exhaustive};
use mcp_core::sig::{keygen, sign, verify, SigTag, SigningContext};
use mcp_core::sim::hiding::chi_square_two_sample;
use mcp_core::sim::wop::wop_face_check;
use mcp_core::sim::{check_delivery_bound, check_safety, generate_workload, run_execution, SimConfig, Strategy as Attack};
use mcp_core::vc_commit;

fn prime() -> impl Strategy<Value = u64> {
    prop_oneof![
        Just(5u64),
        Just(7),
        Just(97),
        Just(65_537),
        Just((1u64 << 61) - 1),
        (11u64..5000).prop_filter("prime", |&p| is_prime(p)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn field_axioms(p in prime(), a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let f = Field::new(p).unwrap();
        let (a, b, c) = (f.elem(a % p), f.elem(b % p), f.elem(c % p));
        prop_assert_eq!(f.add(a, b), f.add(b, a));
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(a, f.neg(a)), f.zero());
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        if !a.is_zero() {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), f.one());
        }
        // independent u128 oracle
        prop_assert_eq!(f.mul(a, b).value() as u128, a.value() as u128 * b.value() as u128 % p as u128);
    }

    #[test]
    fn interpolation_inverts_evaluation(p in prime(), seed in any::<u64>(), deg in 0usize..6) {
        let f = Field::new(p).unwrap();
        prop_assume!(p as usize > deg + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poly = Polynomial::new(f.random_vec(&mut rng, deg + 1));
        let mut xs = HashSet::new();
        while xs.len() < deg + 1 {
            xs.insert(rng.gen_range(0..p));
        }
        let points: Vec<(FieldElement, FieldElement)> =
            xs.into_iter().map(|x| (f.elem(x), poly.eval(&f, f.elem(x)))).collect();
        let back = interpolate(&f, &points, deg).unwrap();
        prop_assert_eq!(back.coefficients(), poly.coefficients());
    }

    #[test]
    fn hecc_decodes_from_any_threshold_subset(
        p in prime(), k in 1usize..4, t in 0usize..4, extra in 0usize..4, seed in any::<u64>(),
    ) {
        let n = k + t + extra;
        prop_assume!((p as usize) > n);
        let f = Field::new(p).unwrap();
        let hecc = Hecc::new(f, HeccParams::new(n, k, t)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = f.random_vec(&mut rng, k);
        let r = f.random_vec(&mut rng, t);
        let code = hecc.encode(&m, &r).unwrap();
        prop_assert_eq!(&code, &hecc.encode(&m, &r).unwrap());
        let mut idx: Vec<usize> = (1..=n).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.gen_range(0..=i));
        }
        let pairs: Vec<(FieldElement, usize)> = idx[..k + t].iter().map(|&i| (code[i - 1], i)).collect();
        prop_assert_eq!(hecc.decode(&pairs).unwrap(), (m, r));
    }

    #[test]
    fn hecc_byte_round_trip(payload in proptest::collection::vec(any::<u8>(), 0..300), seed in any::<u64>(), p in prime()) {
        let f = Field::new(p).unwrap();
        prop_assume!(p > 10);
        let hecc = Hecc::new(f, HeccParams::new(10, 2, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = hecc.rows_for(payload.len(), 2);
        let enc = hecc.encode_bytes(rows, &payload, &mut rng).unwrap();
        let cols = enc.shreds.columns();
        let chosen: Vec<(usize, &[FieldElement])> = [10usize, 3, 7, 1].iter().map(|&i| (i, &cols[i - 1][..])).collect();
        prop_assert_eq!(hecc.decode_bytes(&chosen).unwrap(), payload);
    }

    #[test]
    fn commitment_opens_everywhere(len in 1usize..20, width in 1usize..4, seed in any::<u64>()) {
        let f = Field::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<Vec<FieldElement>> = (0..len).map(|_| f.random_vec(&mut rng, width)).collect();
        let masks = f.random_vec(&mut rng, len);
        let tree = CommitmentTree::build(&f, &values, &masks).unwrap();
        let c = tree.commitment();
        for i in 1..=len {
            let o = tree.open(i).unwrap();
            prop_assert!(mcp_core::vc_verify(&f, &c, i, &o.value, o.randomness, &o.witness));
        }
    }

    #[test]
    fn signatures_round_trip_and_separate(body in proptest::collection::vec(any::<u8>(), 0..64), slot in any::<u64>(), s in any::<[u8; 32]>()) {
        let k = keygen(&s);
        let ctx = SigningContext::new(SigTag::Attest, slot, &body);
        let sig = sign(&k, &ctx);
        prop_assert!(verify(k.public(), &ctx, &sig));
        prop_assert!(!verify(k.public(), &SigningContext::new(SigTag::Block, slot, &body), &sig));
    }
}

#[test]
fn hecc_exhaustive_small_fields() {
    for (p, k, t, n) in [(5, 1, 1, 3), (5, 1, 1, 4), (5, 1, 2, 4)] {
        let r = hecc_exhaustive(p, k, t, n);
        assert!(r.passed(), "{r}");
    }
}

#[test]
fn interpolation_exhaustive_p7() {
    let f = Field::new(7).unwrap();
    for d in 0..=2usize {
        for code in 0..7u64.pow(d as u32 + 1) {
            let coeffs: Vec<FieldElement> = (0..=d).map(|j| f.elem(code / 7u64.pow(j as u32) % 7)).collect();
            let poly = Polynomial::new(coeffs.clone());
            for start in 0..(7 - d as u64) {
                let points: Vec<_> = (start..=start + d as u64).map(|x| (f.elem(x), poly.eval(&f, f.elem(x)))).collect();
                assert_eq!(interpolate(&f, &points, d).unwrap().coefficients(), &coeffs[..]);
            }
        }
    }
}

#[test]
fn commitment_binding_probe() {
    let f = Field::mersenne61();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut roots = HashSet::new();
    let mut distinct = HashSet::new();
    for _ in 0..10_000 {
        let len = rng.gen_range(1..6);
        let v = f.random_vec(&mut rng, len);
        let r = f.random_vec(&mut rng, len);
        if distinct.insert((v.clone(), r.clone())) {
            assert!(roots.insert(*vc_commit(&f, &v, &r).unwrap().root()), "collision");
        }
    }
    // neighbouring instances differing in one coordinate
    for _ in 0..10_000 {
        let v = f.random_vec(&mut rng, 4);
        let r = f.random_vec(&mut rng, 4);
        let mut v2 = v.clone();
        let j = rng.gen_range(0..4);
        v2[j] = f.add(v2[j], f.one());
        assert_ne!(vc_commit(&f, &v, &r).unwrap(), vc_commit(&f, &v2, &r).unwrap());
    }
}

#[test]
fn commitment_position_binding_probe() {
    let r = commitment_suite(3, 10_000);
    assert!(r.passed(), "{r}");
}

#[test]
fn commitment_hiding_smoke() {
    let f = Field::mersenne61();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v0 = vec![f.elem(0); 4];
    let v1: Vec<FieldElement> = (1..=4).map(|i| f.elem(i * 1_000_003)).collect();
    let sample = |v: &[FieldElement], rng: &mut ChaCha8Rng| -> Vec<u64> {
        (0..10_000)
            .map(|_| {
                let r = f.random_vec(rng, v.len());
                (vc_commit(&f, v, &r).unwrap().root()[0] >> 4) as u64
            })
            .collect()
    };
    let a = sample(&v0, &mut rng);
    let b = sample(&v1, &mut rng);
    let p = chi_square_two_sample(&a, &b);
    assert!(p >= 0.01, "p = {p}");
}

#[test]
fn relay_sampling_matches_binomial_tail() {
    for (n, n_relay, beta) in [(100, 50, Fraction::new(1, 10)), (60, 30, Fraction::new(3, 20))] {
        let r = wop_face_check(n, n_relay, beta, 10_000, 17);
        assert!(r.consistent(0.01), "{r:?}");
    }
}

fn random_config(seed: u64) -> SimConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = SimConfig::new(ProtocolParams::with_defaults(12, 5), 5, seed);
    c.gst_ms = [0, 450, 1000][rng.gen_range(0..3)];
    c.workload = generate_workload(&c.params, 5, 3.0, seed);
    let attacks = [
        Attack::Crash,
        Attack::WithholdShreds { targets: vec![] },
        Attack::WithholdAttestations { targets: vec![2, 5] },
        Attack::BadEncoding,
        Attack::LeaderSilent,
    ];
    for node in 0..2 {
        c.corrupt(node, vec![attacks[rng.gen_range(0..attacks.len())].clone()]);
    }
    c
}

#[test]
fn random_executions_respect_delivery_bound_and_safety() {
    for seed in 0..40 {
        let trace = run_execution(&random_config(seed)).unwrap();
        let d = check_delivery_bound(&trace);
        assert!(d.passed, "seed {seed}: {d:?}");
        let s = check_safety(&trace);
        assert!(s.passed, "seed {seed}: {s:?}");
        // decisions arrive in strictly increasing slot order
        let mut by_slot = BTreeMap::new();
        for d in &trace.decisions {
            assert!(by_slot.insert(d.slot, d.t).is_none());
        }
        assert!(by_slot.values().zip(by_slot.values().skip(1)).all(|(a, b)| a <= b));
    }
}
