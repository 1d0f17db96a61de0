use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use limitset_core::monotone::{base_point, dichotomy_report, SystemInstance, TABLE_DU, TABLE_U_SPAN};
use limitset_core::oscillation::{h_quadrature, h_semianalytic};
use limitset_core::{choose_c0, FieldTable};

fn field_eval(c: &mut Criterion) {
    let p = choose_c0(1.0).unwrap();
    let direct = FieldTable::new(p).unwrap();
    let tabled = FieldTable::with_table(p, TABLE_DU, p.u0() + TABLE_U_SPAN).unwrap();
    let rs: Vec<f64> = (1..=64).map(|i| p.rho * i as f64 / 65.0).collect();
    let mut group = c.benchmark_group("g");
    group.bench_function("direct", |b| {
        b.iter(|| rs.iter().map(|&r| direct.g(black_box(r))).sum::<f64>())
    });
    group.bench_function("tabled", |b| {
        b.iter(|| rs.iter().map(|&r| tabled.g(black_box(r))).sum::<f64>())
    });
    group.finish();
}

fn h_eval(c: &mut Criterion) {
    let p = choose_c0(1.0).unwrap();
    let mut group = c.benchmark_group("h");
    group.bench_function("quadrature_t1e6", |b| {
        b.iter(|| h_quadrature(&p, black_box(0.3), black_box(-0.4), 1e6).unwrap())
    });
    group.bench_function("semianalytic_t1e6", |b| {
        b.iter(|| h_semianalytic(&p, black_box(0.3), black_box(-0.4), 1e6).unwrap())
    });
    group.finish();
}

fn dichotomy(c: &mut Criterion) {
    let p = choose_c0(1.0).unwrap();
    let sys = SystemInstance::build(p).unwrap();
    let base = base_point(&p);
    let mut group = c.benchmark_group("dichotomy");
    group.sample_size(10);
    group.bench_function("certificate_4_periods", |b| {
        b.iter(|| dichotomy_report(&sys, base, 0.0, black_box(0.5), 4).unwrap())
    });
    group.finish();
}

criterion_group!(benches, field_eval, h_eval, dichotomy);
criterion_main!(benches);
