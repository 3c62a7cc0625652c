//! Rule mining over the planted graph.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hornbeam::embedding::ModelKind;
use hornbeam::rules::{mine, MinerConfig};
use hornbeam_bench::{planted_graph, state_for};

fn bench_mine(c: &mut Criterion) {
    let kg = planted_graph();
    let state = state_for(ModelKind::DistMult, 32, &kg);
    let mut group = c.benchmark_group("mine");
    group.sample_size(10);
    for &max_len in &[2usize, 3] {
        let cfg = MinerConfig { max_len, ..MinerConfig::default() };
        group.bench_function(format!("max_len_{max_len}"), |b| {
            b.iter(|| mine(black_box(&kg), &state, &cfg).expect("mines"))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_mine);
criterion_main!(benches);
