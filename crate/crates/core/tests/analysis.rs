use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use mcp_core::analysis::{
    binomial_tail, binomial_tail_at_least, chernoff_relay_bound, fault_probabilities, mtbf_years, parse_decimal, to_f64,
    FaultModel,
};

fn q(s: &str) -> BigRational {
    parse_decimal(s).unwrap()
}

/// Tail via the Pascal recurrence on integer weights, without binomial
/// coefficients: W(n, k) = a W(n-1, k-1) + (b - a) W(n-1, k).
fn oracle_tail_at_least(n: usize, p: &BigRational, from: usize) -> BigRational {
    let a = p.numer().clone();
    let b = p.denom().clone();
    let c = &b - &a;
    let mut w = vec![BigInt::one()];
    for _ in 0..n {
        let mut next = vec![BigInt::zero(); w.len() + 1];
        for (k, x) in w.iter().enumerate() {
            next[k] += &c * x;
            next[k + 1] += &a * x;
        }
        w = next;
    }
    let sum: BigInt = w.iter().skip(from).sum();
    BigRational::new(sum, b.pow(n as u32))
}

#[test]
fn reference_point_matches_recurrence_oracle() {
    let p = q("0.15");
    let tail = binomial_tail(512, &p, &q("128")).unwrap();
    assert_eq!(tail, oracle_tail_at_least(512, &p, 129));
    let v = to_f64(&tail);
    assert!((1e-10..=1e-8).contains(&v), "{v}");
    assert!((v - 1.319_384_247_479_357e-9).abs() < 1e-20, "golden {v}");

    let hiding = binomial_tail(512, &p, &q("76.8")).unwrap();
    assert_eq!(hiding, oracle_tail_at_least(512, &p, 77));
    let h = to_f64(&hiding);
    assert!((0.35..=0.55).contains(&h), "{h}");
}

#[test]
fn reference_report_and_mtbf() {
    let r = fault_probabilities(&FaultModel::reference()).unwrap();
    assert_eq!(r.p_liveness, r.p_scr);
    let years = mtbf_years(&r.p_liveness, 400.0);
    assert!((3.0..=30.0).contains(&years), "{years}");
}

#[test]
fn small_tails_against_oracle() {
    for n in [1usize, 2, 7, 20, 63] {
        for p in ["0", "1", "0.5", "0.01", "3/7"] {
            let p = q(p);
            for from in 0..=n + 1 {
                assert_eq!(
                    binomial_tail_at_least(n as u64, &p, from as u64).unwrap(),
                    oracle_tail_at_least(n, &p, from),
                    "n={n} p={p} from={from}"
                );
            }
        }
    }
}

#[test]
fn chernoff_dominates_exact_tail_on_grid() {
    for beta in ["0.05", "0.10", "0.15", "0.19"] {
        for n in [64u64, 256, 512] {
            let b = q(beta);
            let at_least = n.div_ceil(5); // ceil(n / 5)
            let exact = to_f64(&binomial_tail_at_least(n, &b, at_least).unwrap());
            let bound = chernoff_relay_bound(&b, n).unwrap();
            assert!(exact <= bound, "beta={beta} n={n}: {exact} > {bound}");
        }
    }
}

#[test]
fn chernoff_formula_oracle() {
    let direct = |beta: f64, n: f64| (-n * (1.0 - 5.0 * beta).powi(2) / (5.0 * (1.0 + 5.0 * beta))).exp();
    for (beta, n) in [("0.1", 512u64), ("0.05", 64), ("0.19", 256)] {
        let got = chernoff_relay_bound(&q(beta), n).unwrap();
        let want = direct(beta.parse().unwrap(), n as f64);
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }
}

fn frac(max: u64) -> impl Strategy<Value = BigRational> {
    (0..=max).prop_map(move |k| BigRational::new(k.into(), max.into()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_decreases_in_t(n in 1u64..80, p in frac(100), t1 in 0u64..80, dt in 0u64..20) {
        let lo = binomial_tail(n, &p, &BigRational::from_integer(t1.into())).unwrap();
        let hi = binomial_tail(n, &p, &BigRational::from_integer((t1 + dt).into())).unwrap();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn tail_increases_in_p(n in 1u64..80, a in 0u64..=100, d in 0u64..=100, t in 0u64..80) {
        let p1 = BigRational::new(a.into(), 100.into());
        let p2 = BigRational::new((a + d).min(100).into(), 100.into());
        let t = BigRational::from_integer(t.into());
        prop_assert!(binomial_tail(n, &p1, &t).unwrap() <= binomial_tail(n, &p2, &t).unwrap());
    }

    #[test]
    fn tail_in_unit_interval(n in 0u64..60, p in frac(37), t in frac(7)) {
        let v = binomial_tail(n, &p, &(t * BigRational::from_integer(n.into()))).unwrap();
        prop_assert!(v >= BigRational::zero() && v <= BigRational::one());
    }

    #[test]
    fn raising_phi_trades_scr_for_liveness(step in 1u64..5, f in 1u64..30) {
        let mut m = FaultModel::reference();
        m.n_relay = 100;
        m.f = BigRational::new(f.into(), 100.into());
        let base = fault_probabilities(&m).unwrap();
        m.phi += BigRational::new(step.into(), 100.into());
        let raised = fault_probabilities(&m).unwrap();
        prop_assert!(raised.p_liveness <= base.p_liveness);
        prop_assert!(raised.p_scr >= base.p_scr);
    }
}
