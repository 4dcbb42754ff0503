use mcp_core::hecc::{Hecc, HeccParams};
use mcp_core::protocol::Transaction;
use mcp_core::sim::hiding::{check_hiding, distinguisher_advantage, HidingExperiment};

fn challenge() -> [Vec<u8>; 2] {
    [b"pay alice 100".to_vec(), b"pay bobby 999".to_vec()]
}

fn pairs(exp: &HidingExperiment, count: u64) -> Vec<[mcp_core::sim::hiding::HidingView; 2]> {
    (0..count).map(|i| exp.run_pair(i).unwrap()).collect()
}

#[test]
fn t_corrupted_relays_learn_nothing() {
    let exp = HidingExperiment::small(2, 11, challenge()).unwrap();
    let views = pairs(&exp, 300);
    let p = &exp.base.params;
    assert!(views[0][0].cut < u64::MAX, "challenge batch never became available");
    assert!(views.iter().all(|v| v[0].shares.iter().all(|s| s.1.is_some())));
    let report = check_hiding(&p.field, &views, 0.01).unwrap();
    assert!(report.passed, "{report:?}");
    let hecc = Hecc::new(p.field, HeccParams::new(p.n_relay, p.k(), p.t())).unwrap();
    let adv = distinguisher_advantage(&hecc, &Transaction::new(challenge()[0].clone()), &views);
    assert_eq!(adv, 0.0);
}

#[test]
fn t_plus_one_corrupted_relays_distinguish() {
    let exp = HidingExperiment::small(3, 11, challenge()).unwrap();
    let views = pairs(&exp, 100);
    let p = &exp.base.params;
    let hecc = Hecc::new(p.field, HeccParams::new(p.n_relay, p.k(), p.t())).unwrap();
    let adv = distinguisher_advantage(&hecc, &Transaction::new(challenge()[0].clone()), &views);
    assert!(adv > 0.9, "advantage {adv}");
}
