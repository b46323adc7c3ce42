use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ps_whittle::whittle::default_truncation;
use ps_whittle::{
    build_index_table, compute_index, joint_rvi, simulate, single_queue_rvi, IndexIterationConfig, PolicyKind,
    RviOptions, ServerParams,
};
use ps_whittle_bench::{three_servers, two_servers};

const SERVER: ServerParams = ServerParams { q: 0.55, cost_c: 30.0 };

fn index(c: &mut Criterion) {
    let iter = IndexIterationConfig::default();
    let mut g = c.benchmark_group("compute_index");
    for x in [0usize, 10, 40] {
        g.bench_with_input(BenchmarkId::from_parameter(x), &x, |b, &x| {
            b.iter(|| compute_index(black_box(x), &SERVER, 0.4, &iter, 80).unwrap())
        });
    }
    g.finish();

    let cfg = three_servers();
    c.bench_function("build_index_table/3x41", |b| {
        b.iter(|| build_index_table(&cfg, 40, &iter, default_truncation(40, cfg.buffer)).unwrap())
    });
}

fn dynamic_programs(c: &mut Criterion) {
    let opts = RviOptions::default();
    c.bench_function("single_queue_rvi/n=100", |b| {
        b.iter(|| single_queue_rvi(black_box(500.0), &SERVER, 0.4, 100, &opts).unwrap())
    });

    let mut g = c.benchmark_group("joint_rvi");
    g.sample_size(10);
    for buffer in [10usize, 25] {
        let cfg = two_servers(buffer);
        g.bench_with_input(BenchmarkId::from_parameter(buffer), &cfg, |b, cfg| {
            b.iter(|| joint_rvi(cfg, &RviOptions::new(1e-7, 10_000_000)).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = three_servers();
    let iter = IndexIterationConfig::default();
    let table = Arc::new(build_index_table(&cfg, 40, &iter, default_truncation(40, cfg.buffer)).unwrap());
    let mut g = c.benchmark_group("simulate/100k_slots");
    g.sample_size(10);
    for policy in [PolicyKind::Whittle(table), PolicyKind::Cmu, PolicyKind::Random] {
        g.bench_function(policy.name(), |b| b.iter(|| simulate(&cfg, &policy, 100_000, 1_000, 1).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, index, dynamic_programs, simulation);
criterion_main!(benches);
