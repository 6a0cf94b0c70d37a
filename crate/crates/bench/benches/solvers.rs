use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wgarray::{
    cascade, decompose, ensemble_spectrum, evolve, lattice_t, solve_steady, spectrum, DriveField,
    LatticeSpec, PositionModel,
};
use wgarray_bench::{evolve_case, grid, irregular, lossy, quarter_wave};

fn steady(c: &mut Criterion) {
    let p = lossy();
    let d = DriveField::unit();
    let mut g = c.benchmark_group("solve_steady");
    for n in [4, 16, 64] {
        let a = irregular(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| solve_steady(black_box(a), &p, &d))
        });
    }
    g.finish();
    let a = quarter_wave(8, 0.0);
    let gr = grid(400);
    c.bench_function("spectrum/n8_400pts", |b| {
        b.iter(|| spectrum(black_box(&a), &p, &d, &gr))
    });
}

fn transfer(c: &mut Criterion) {
    let p = lossy();
    let mut g = c.benchmark_group("lattice_t");
    for n in [10, 1000, 100_000] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| lattice_t(black_box(n), 0.27, 0.8, &p))
        });
    }
    g.finish();
    let a = irregular(64);
    c.bench_function("cascade/n64", |b| b.iter(|| cascade(black_box(&a), &p)));
}

fn modes(c: &mut Criterion) {
    let p = lossy();
    let mut g = c.benchmark_group("decompose");
    for n in [4, 16, 64] {
        let a = irregular(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| decompose(black_box(a), &p))
        });
    }
    g.finish();
}

fn dynamics(c: &mut Criterion) {
    let p = lossy();
    let case = evolve_case(8);
    c.bench_function("evolve/n8_t20", |b| {
        b.iter(|| {
            evolve(
                &case.array,
                &p,
                &case.detunings,
                &case.drive,
                &case.b0,
                (0.0, 20.0),
                &case.settings,
            )
        })
    });
}

fn ensemble(c: &mut Criterion) {
    let p = lossy();
    let spec = LatticeSpec::new(8, 0.25, 0.0).unwrap();
    let model = PositionModel::gaussian(0.03).unwrap();
    let gr = grid(100);
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("n8_100pts_50real", |b| {
        b.iter(|| {
            ensemble_spectrum(
                &model,
                &spec,
                &p,
                &DriveField::unit(),
                &gr,
                50,
                black_box(1),
            )
        })
    });
    g.finish();
}

criterion_group!(benches, steady, transfer, modes, dynamics, ensemble);
criterion_main!(benches);
