use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rotorlab_core::classical::{evolve_ensemble, Ensemble, KickPotential};
use rotorlab_core::coupled::{CoupledPropagator, CoupledSpec, TwoRotorState};
use rotorlab_core::nonhermitian::nh_eigenvalues;
use rotorlab_core::quantum::{init_state, FloquetSpec, InitKind, Propagator};

fn floquet_step(c: &mut Criterion) {
    for l in [1024usize, 8192] {
        let spec = FloquetSpec::kicked_rotor(20.0, 0.25);
        let mut p = Propagator::new(&spec, l);
        let mut s = init_state(l, 0.25, &InitKind::Delta { m0: 0 }).unwrap();
        c.bench_function(&format!("floquet_step_l{l}"), |b| {
            b.iter(|| p.step(black_box(&mut s), 0).unwrap());
        });
    }
}

fn coupled_step(c: &mut Criterion) {
    let spec = CoupledSpec::new(9.0, 10.0, 0.1).unwrap();
    let l = 128;
    let d = InitKind::Delta { m0: 0 };
    let mut s = TwoRotorState::from_inits(l, l, &d, &d).unwrap();
    let mut p = CoupledPropagator::new(&spec, l, l);
    c.bench_function("coupled_step_l128", |b| {
        b.iter(|| p.step(black_box(&mut s)).unwrap());
    });
}

fn nh_diagonalization(c: &mut Criterion) {
    let mut g = c.benchmark_group("nh");
    g.sample_size(10);
    g.bench_function("nh_eigenvalues_l96", |b| {
        b.iter(|| nh_eigenvalues(3.0, 1.4, black_box(0.05), 96).unwrap());
    });
    g.finish();
}

fn ensemble(c: &mut Criterion) {
    let e = Ensemble::uniform_theta(10_000, 0.0, 1);
    let pot = KickPotential::cosine(10.0);
    let mut g = c.benchmark_group("classical");
    g.sample_size(10);
    g.bench_function("ensemble_1e4_x100", |b| {
        b.iter(|| evolve_ensemble(black_box(&e), &pot, 100, None, &[]).unwrap());
    });
    g.finish();
}

criterion_group!(benches, floquet_step, coupled_step, nh_diagonalization, ensemble);
criterion_main!(benches);
