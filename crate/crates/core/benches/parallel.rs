use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use incentme_core::{generate_instance, tvm_run, PopulationConfig};

fn bench_instance(bidders: usize) -> incentme_core::AuctionInstance {
    let config = PopulationConfig {
        sectors: 100,
        timesteps: 12,
        bidder_count: bidders,
        rng_seed: 7,
        ..PopulationConfig::default()
    };
    generate_instance(&config, 10.0).unwrap()
}

fn auction_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("tvm_run");
    for &m in &[200usize, 1000] {
        let instance = bench_instance(m);
        group.bench_with_input(BenchmarkId::new("jobs-1", m), &instance, |b, inst| {
            b.iter(|| tvm_run(inst, 1))
        });
        group.bench_with_input(BenchmarkId::new("jobs-4", m), &instance, |b, inst| {
            b.iter(|| tvm_run(inst, 4))
        });
    }
    group.finish();
}

fn budget_search(c: &mut Criterion) {
    let instance = bench_instance(400);
    let mut group = c.benchmark_group("hvm_run");
    group.sample_size(10);
    group.bench_function("jobs-1", |b| b.iter(|| incentme_core::hvm_run(&instance, 1)));
    group.bench_function("jobs-4", |b| b.iter(|| incentme_core::hvm_run(&instance, 4)));
    group.finish();
}

criterion_group!(benches, auction_run, budget_search);
criterion_main!(benches);
