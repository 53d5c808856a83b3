use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spikefield::sim::{simulate, SimConfig};
use spikefield_bench::default_setup;

fn network(c: &mut Criterion) {
    let (model, curve) = default_setup(1.0);
    let mut group = c.benchmark_group("network");
    group.sample_size(20);
    for n in [1000usize, 10_000] {
        group.bench_with_input(BenchmarkId::new("uncoupled", n), &n, |b, &n| {
            b.iter(|| simulate(&model, None, &SimConfig::new(n, 1.0, 1)).unwrap().spikes)
        });
        group.bench_with_input(BenchmarkId::new("fully_coupled", n), &n, |b, &n| {
            let cfg = SimConfig {
                coupled: n,
                observe: vec![1.0],
                ..SimConfig::new(n, 1.0, 1)
            };
            b.iter(|| black_box(simulate(&model, Some(&curve), &cfg).unwrap().spikes))
        });
    }
    group.finish();
}

criterion_group!(benches, network);
criterion_main!(benches);
