use criterion::{criterion_group, criterion_main, Criterion};
use gapdefect_bench::{kp_example, polynomial_example};
use gapdefect_core::evans::{evans_roots_in_gap, DEFAULT_GRID_N, DEFAULT_ROOT_TOL};
use gapdefect_core::floquet::{gap, gaps_through};
use gapdefect_core::*;
use std::hint::black_box;

fn propagation(c: &mut Criterion) {
    let kp = kp_example();
    let poly = polynomial_example();
    c.bench_function("monodromy/kp", |b| b.iter(|| monodromy_periodic(&kp, black_box(123.4))));
    c.bench_function("monodromy/polynomial", |b| b.iter(|| monodromy_periodic(&poly, black_box(123.4))));
    c.bench_function("phi/kp", |b| b.iter(|| phi_matrix(&kp, black_box(123.4), 1e-10)));
}

fn spectral(c: &mut Criterion) {
    let kp = kp_example();
    c.bench_function("gaps_through/kp/12", |b| b.iter(|| gaps_through(&kp, black_box(12), 0.5, 1e-8)));
    let g9 = gap(&kp, 9, 0.5, 1e-8).unwrap().unwrap();
    c.bench_function("evans_roots/kp/G9", |b| b.iter(|| evans_roots_in_gap(&kp, black_box(&g9), DEFAULT_GRID_N, DEFAULT_ROOT_TOL)));
    let mut slow = c.benchmark_group("oracle");
    slow.sample_size(10);
    let g4 = gap(&kp, 4, 0.5, 1e-8).unwrap().unwrap();
    slow.bench_function("kp/G4", |b| b.iter(|| gap_count_oracle_auto(&kp, black_box(&g4), &OracleParams::default())));
    slow.finish();
}

fn diophantine(c: &mut Criterion) {
    let q = QuadraticIrrational::golden();
    c.bench_function("form_solutions/golden/11", |b| b.iter(|| form_solutions(&q, black_box(11), 9)));
    c.bench_function("fa_quadratic/golden/36", |b| b.iter(|| fa_quadratic(&q, black_box(36))));
}

criterion_group!(benches, propagation, spectral, diophantine);
criterion_main!(benches);
