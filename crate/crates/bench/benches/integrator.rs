use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qfeedback_bench::fig1;
use qfeedback::analysis::generator_v_closed;
use qfeedback::integrator::{simulate, step};
use qfeedback::run_ensemble;
use std::hint::black_box;

fn bench_step(c: &mut Criterion) {
    let f = fig1(1.0);
    c.bench_function("step", |b| {
        b.iter(|| step(black_box(&f.ic), 2.5, black_box(0.01), 1e-3, &f.phys, &f.est))
    });
    c.bench_function("generator_closed", |b| {
        b.iter(|| generator_v_closed(black_box(&f.ic), 2.5, &f.phys, &f.est))
    });
}

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    for t_final in [1.0, 10.0] {
        let f = fig1(t_final);
        group.throughput(Throughput::Elements(f.cfg.n_steps() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(t_final), &f, |b, f| {
            b.iter(|| simulate(&f.ic, &f.phys, &f.est, &f.law, &f.cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    let f = fig1(10.0);
    for n in [10usize, 100] {
        group.throughput(Throughput::Elements((n * f.cfg.n_steps()) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| run_ensemble(&f.ic, &f.phys, &f.est, &f.law, &f.cfg, n).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_step, bench_simulate, bench_ensemble);
criterion_main!(benches);
