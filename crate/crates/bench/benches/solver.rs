use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spikefield::limit::{fluctuation_variance, LimitConfig};
use spikefield::meanfield::{density_at, solve_rate_curve, SolverOptions, DEFAULT_NODES};
use spikefield::Model;
use spikefield_bench::default_setup;

fn meanfield(c: &mut Criterion) {
    let model = Model::default_model();
    let mut group = c.benchmark_group("meanfield");
    group.sample_size(10);
    group.bench_function("solve_T1_dt1e-3", |b| {
        b.iter(|| solve_rate_curve(&model, &SolverOptions::default().with_horizon(1.0)).unwrap().iterations)
    });
    let (model, curve) = default_setup(1.0);
    group.bench_function("density_at_t1", |b| {
        b.iter(|| black_box(density_at(&model, &curve, 1.0, DEFAULT_NODES).unwrap().mass))
    });
    group.bench_function("covariance_recursion_D8", |b| {
        let cfg = LimitConfig::default();
        b.iter(|| black_box(fluctuation_variance(&model, &curve, &cfg).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, meanfield);
criterion_main!(benches);
