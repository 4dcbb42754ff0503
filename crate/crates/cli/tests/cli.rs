use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn mcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcp")).args(args).output().expect("binary runs")
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

fn simulate(name: &str, out: &Path, extra: &[&str]) -> Output {
    let config = bundled(name);
    let mut args = vec!["simulate", "--config", &config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    mcp(&args)
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn honest_baseline_passes_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let o = simulate("honest_baseline", &a, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&a)["passed"], true);
    assert_eq!(simulate("honest_baseline", &b, &[]).status.code(), Some(0));
    let trace = std::fs::read(a.join("trace.jsonl")).unwrap();
    assert!(!trace.is_empty());
    assert_eq!(trace, std::fs::read(b.join("trace.jsonl")).unwrap());
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());

    assert_eq!(simulate("honest_baseline", &c, &["--seed", "99"]).status.code(), Some(0));
    assert_eq!(report(&c)["seed"], 99);
    assert_ne!(trace, std::fs::read(c.join("trace.jsonl")).unwrap());

    let first: serde_json::Value = serde_json::from_slice(trace.split(|&b| b == b'\n').next().unwrap()).unwrap();
    for key in ["t", "sent", "kind", "from", "to", "slot", "bytes_hex"] {
        assert!(first.get(key).is_some(), "trace line lacks {key}");
    }
}

#[test]
fn scr_attack_holds() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate("scr_attack", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["report"]["scr"]["passed"], true);
    // slot 1 carries the transactions, slot 2 is the silent leader's
    assert_eq!(r["report"]["scr"]["slots_checked"], 3);
    assert_eq!(r["report"]["scr"]["empty_slots"], 2);
}

#[test]
fn negative_control_fails_scr() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate("negative_control", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("selective-censorship resistance"), "{}", stderr(&o));
    assert_eq!(report(dir.path())["report"]["safety"]["passed"], true);
}

#[test]
fn liveness_stall_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate("liveness_stall", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("liveness"));
    let stalls = report(dir.path())["report"]["liveness"]["stalls"].as_array().unwrap().clone();
    assert!(!stalls.is_empty());
    assert!(stalls.iter().all(|s| s["proposer"] == 19 && s["slot"] == 1));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = mcp(&["simulate", "--config", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(bundled("honest_baseline")).unwrap().replace("n_relay = 5", "n_relay = 5\nphi = \"0.95\"");
    std::fs::write(&bad, text).unwrap();
    let o = mcp(&["simulate", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("phi"), "{}", stderr(&o));
}

fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn faultprob_reference_point() {
    let o = mcp(&["faultprob", "--n-relay", "512", "--f", "0.15", "--gamma", "0.3", "--phi", "0.55", "--mu", "0.8", "--t", "76.8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&o);
    assert_eq!(rows.len(), 1);
    let p: f64 = rows[0][6].parse().unwrap();
    assert!((1e-10..=1e-8).contains(&p));
    assert_eq!(rows[0][6], rows[0][7]);
    let years: f64 = rows[0][9].parse().unwrap();
    assert!((3.0..=30.0).contains(&years));
}

#[test]
fn faultprob_zero_corruption_row() {
    let o = mcp(&["faultprob", "--n-relay", "512", "--f", "0", "--gamma", "0.3", "--phi", "0.55", "--mu", "0.8", "--t", "76.8"]);
    assert_eq!(o.status.code(), Some(0));
    let row = &csv_rows(&o)[0];
    for value in &row[6..=8] {
        assert_eq!(value.parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(row[9], "inf");
}

#[test]
fn faultprob_sweep_is_monotone_in_f() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.toml");
    std::fs::write(
        &sweep,
        "n_relay = 512\nf = [\"0.05\", \"0.08\", \"0.11\", \"0.14\", \"0.17\", \"0.20\"]\ngamma = \"0.3\"\nphi = \"0.55\"\nmu = \"0.8\"\nt = \"76.8\"\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let o = mcp(&["faultprob", "--sweep", sweep.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(6).take(3).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for w in rows.windows(2) {
        assert!(w[0].iter().zip(&w[1]).all(|(a, b)| a <= b), "{rows:?}");
    }
}

#[test]
fn faultprob_argument_errors_exit_2() {
    assert_eq!(mcp(&["faultprob", "--n-relay", "512"]).status.code(), Some(2));
    let o = mcp(&["faultprob", "--n-relay", "512", "--f", "1.5", "--gamma", "0.3", "--phi", "0.55", "--mu", "0.8", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes_quickly() {
    let start = Instant::now();
    let o = mcp(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert!(start.elapsed() < Duration::from_secs(60));
}

#[test]
fn selftest_detects_corrupted_golden() {
    let golden: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("golden/selftest.txt");
    let text = std::fs::read_to_string(golden).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("golden.txt");
    std::fs::write(&bad, text.replace("hecc_p97_codeword = 10", "hecc_p97_codeword = 11")).unwrap();
    let o = mcp(&["selftest", "--golden", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("hecc_p97_codeword"));
    let missing = dir.path().join("missing.txt");
    assert_eq!(mcp(&["selftest", "--golden", missing.to_str().unwrap()]).status.code(), Some(2));
}
