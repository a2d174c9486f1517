use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qpa_core::qpa::qpa_matrix_pipeline;
use qpa_core::*;

fn point_evaluation(c: &mut Criterion) {
    let params = NoiseParams::new(0.12, 0.08);
    c.bench_function("point/bell_algebra", |b| {
        b.iter(|| evaluate_point(black_box(&params), QpaRoute::BellAlgebra).unwrap())
    });
    c.bench_function("point/matrix", |b| {
        b.iter(|| evaluate_point(black_box(&params), QpaRoute::Matrix).unwrap())
    });
}

fn matrix_pipeline(c: &mut Criterion) {
    let state = assemble_noisy_hyper(&NoiseParams::new(0.2, 0.1)).unwrap();
    c.bench_function("qpa/16_dim_pipeline", |b| {
        b.iter(|| qpa_matrix_pipeline(black_box(&state)))
    });
}

fn default_sweep(c: &mut Criterion) {
    let cfg = SweepConfig::default();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("default_81x81", |b| {
        b.iter(|| run_sweep(black_box(&cfg)).unwrap())
    });
    group.finish();
}

fn montecarlo_point(c: &mut Criterion) {
    let params = NoiseParams::new(0.1, 0.1);
    let cfg = McConfig::new(100_000, 7);
    c.bench_function("montecarlo/point_1e5", |b| {
        b.iter(|| simulate_experiment(black_box(&params), &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    point_evaluation,
    matrix_pipeline,
    default_sweep,
    montecarlo_point
);
criterion_main!(benches);
