use std::hint::black_box;

use collapse_bench::{family, initial_state, model, profile};
use collapse_core::evolve::scheme::{midpoint_step, strang_step, SolverTolerance};
use collapse_core::modulation::{decompose, ModulationState};
use collapse_core::profiles::solve_pb;
use collapse_core::radiation::solve_radiation;
use criterion::{criterion_group, criterion_main, Criterion};

fn steppers(c: &mut Criterion) {
    let p = model(1e-2);
    for n in [1536, 6144] {
        let (op, psi) = initial_state(n);
        let dt = 2e-3 * 0.25;
        c.bench_function(&format!("midpoint_step/{n}"), |b| {
            b.iter(|| midpoint_step(&op, black_box(psi.samples()), dt, &p, SolverTolerance::default()).unwrap())
        });
        c.bench_function(&format!("strang_step/{n}"), |b| b.iter(|| strang_step(&op, black_box(psi.samples()), dt, &p)));
        c.bench_function(&format!("fv_energy/{n}"), |b| b.iter(|| op.energy(black_box(psi.samples()), p.sigma1)));
    }
}

fn profiles(c: &mut Criterion) {
    let p = model(0.0);
    let mut g = c.benchmark_group("profiles");
    g.sample_size(10);
    g.bench_function("solve_pb/0.3", |b| b.iter(|| solve_pb(&p, black_box(0.3), 0.02, 1024).unwrap()));
    let prof = profile(0.3);
    g.bench_function("radiation/0.3", |b| b.iter(|| solve_radiation(black_box(&prof)).unwrap()));
    g.finish();
}

fn modulation(c: &mut Criterion) {
    let f = family();
    let psi = f.q_b(0.3).unwrap();
    let guess = ModulationState::new(0.31, 1.02, 0.05);
    let mut g = c.benchmark_group("modulation");
    g.sample_size(20);
    g.bench_function("decompose", |b| b.iter(|| decompose(black_box(&psi), &f, &guess).unwrap()));
    g.finish();
}

criterion_group!(kernels, steppers, profiles, modulation);
criterion_main!(kernels);
