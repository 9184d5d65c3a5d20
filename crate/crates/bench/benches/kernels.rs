use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use yamabe_bench::{constant_state, frank, CRITICAL_RADIUS};
use yamabe_core::energy::{gradient, hessian_form};
use yamabe_core::lsred::DEFAULT_NEWTON_TOL;
use yamabe_core::spectrum::DEFAULT_KERNEL_TOL;
use yamabe_core::{
    assemble_operators, build_grid, eigen_decompose, kernel_split, make_model, minimize_energy,
    MinimizeOptions, ModelSpec, ReductionChart,
};

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    for n in [64, 128, 256] {
        let m = Arc::new(make_model(&ModelSpec::Hemisphere { n: 3 }).unwrap());
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| assemble_operators(Arc::clone(&m), build_grid(&m, n).unwrap()).unwrap())
        });
    }
    g.finish();
}

fn variations(c: &mut Criterion) {
    let ops = frank(0.7, 128);
    let u = DVector::from_iterator(
        128,
        ops.grid()
            .nodes()
            .iter()
            .map(|&t| 1.0 + 0.1 * (t / 0.7).cos()),
    );
    let v = yamabe_core::normalize(&ops, &u).unwrap();
    c.bench_function("gradient/128", |b| b.iter(|| gradient(black_box(&v))));
    c.bench_function("hessian_form/128", |b| {
        b.iter(|| hessian_form(black_box(&v)))
    });
}

fn minimize(c: &mut Criterion) {
    let r = 0.8 * CRITICAL_RADIUS;
    let ops = frank(r, 128);
    let u0 = DVector::from_iterator(
        128,
        ops.grid()
            .nodes()
            .iter()
            .map(|&t| 1.0 + 0.1 * (t / r).cos()),
    );
    let opts = MinimizeOptions::default();
    c.bench_function("minimize/frank/128", |b| {
        b.iter(|| minimize_energy(&ops, black_box(&u0), &opts).unwrap())
    });
}

fn spectrum_and_reduction(c: &mut Criterion) {
    let ops = frank(CRITICAL_RADIUS, 128);
    let v = constant_state(&ops);
    c.bench_function("eigen_decompose/128", |b| {
        b.iter(|| eigen_decompose(black_box(&v), 16).unwrap())
    });
    let split = kernel_split(&eigen_decompose(&v, 16).unwrap(), DEFAULT_KERNEL_TOL).unwrap();
    let chart = ReductionChart::new(v, split, DEFAULT_NEWTON_TOL, 30).unwrap();
    c.bench_function("reduced_energy/128", |b| {
        b.iter(|| chart.reduced_energy(black_box(&[1e-2, 0.0])).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = assembly, variations, minimize, spectrum_and_reduction
}
criterion_main!(benches);
