use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mcp_core::analysis::{binomial_tail, parse_decimal};
use mcp_core::commitment::CommitmentTree;
use mcp_core::hecc::{Hecc, HeccParams};
use mcp_core::protocol::ProtocolParams;
use mcp_core::sim::{generate_workload, run_execution, SimConfig};
use mcp_core::{vc_verify, Field};

fn hecc(c: &mut Criterion) {
    let field = Field::mersenne61();
    let code = Hecc::new(field, HeccParams::new(100, 20, 20)).unwrap();
    let payload = vec![7u8; 16 * 1024];
    let rows = code.rows_for(payload.len(), 20);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("hecc encode 16KiB N=100 K=T=20", |b| {
        b.iter(|| code.encode_bytes(rows, black_box(&payload), &mut rng).unwrap())
    });
    let enc = code.encode_bytes(rows, &payload, &mut rng).unwrap();
    let cols = enc.shreds.columns();
    let chosen: Vec<(usize, &[_])> = (60..100).map(|i| (i + 1, &cols[i][..])).collect();
    c.bench_function("hecc decode 16KiB N=100 K=T=20", |b| {
        b.iter(|| code.decode_bytes(black_box(&chosen)).unwrap())
    });
}

fn commitment(c: &mut Criterion) {
    let field = Field::mersenne61();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<_>> = (0..100).map(|_| field.random_vec(&mut rng, 64)).collect();
    let masks = field.random_vec(&mut rng, 100);
    c.bench_function("vc commit 100 rows x 64", |b| {
        b.iter(|| CommitmentTree::build(&field, black_box(&rows), &masks).unwrap())
    });
    let tree = CommitmentTree::build(&field, &rows, &masks).unwrap();
    let com = tree.commitment();
    let o = tree.open(37).unwrap();
    c.bench_function("vc verify 64-element row", |b| {
        b.iter(|| vc_verify(&field, &com, 37, black_box(&o.value), o.randomness, &o.witness))
    });
}

fn analysis(c: &mut Criterion) {
    let p = parse_decimal("0.15").unwrap();
    let t = parse_decimal("128").unwrap();
    c.bench_function("exact binomial tail n=512", |b| b.iter(|| binomial_tail(512, black_box(&p), &t).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let params = ProtocolParams::with_defaults(20, 10);
    let mut config = SimConfig::new(params.clone(), 4, 3);
    config.workload = generate_workload(&params, 4, 5.0, 3);
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("n=20 relays=10 4 slots", |b| b.iter(|| run_execution(black_box(&config)).unwrap()));
    group.finish();
}

criterion_group!(benches, hecc, commitment, analysis, simulation);
criterion_main!(benches);
