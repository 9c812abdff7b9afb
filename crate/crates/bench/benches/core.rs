//! Hot paths of the simulation chain: operator exponentials, Lindblad
//! stepping, phase-space grids, heterodyne sampling, and the inversion.
//!
//! Run with: cargo bench -p qlaunch-bench

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64 as C64;
use std::hint::black_box;

use qlaunch::detection::{sample_heterodyne, DetectorModel};
use qlaunch::dynamics::{evolve_lindblad, time_grid, CollapseSpec, Hamiltonian, SolverOptions};
use qlaunch::hilbert::{
    make_state, mode_operator, tensor, CatParity, FockSpace, LinearOp, ModeLabel, OperatorKind,
    Space, StateSpec,
};
use qlaunch::model::{DriveSchedule, HamiltonianBuilder, HamiltonianTerms, SystemParams};
use qlaunch::phase_space::{husimi_q, wigner, PhaseGrid};
use qlaunch::release::apply_release;
use qlaunch::shaping::{invert_for_coupling, TargetWaveform};
use qlaunch::units::{khz, us};

fn bench_displacement(c: &mut Criterion) {
    let space = Space::single(ModeLabel::Storage, 30).unwrap();
    c.bench_function("displacement_expm_cutoff30", |b| {
        b.iter(|| {
            mode_operator(
                OperatorKind::Displacement(black_box(C64::new(1.3, -0.8))),
                &space,
                ModeLabel::Storage,
            )
            .unwrap()
        })
    });
}

fn bench_lindblad(c: &mut Criterion) {
    let p = SystemParams::bundled();
    let g = khz(54.0);
    let space = Space::product(&[
        FockSpace::new(ModeLabel::Storage, 8).unwrap(),
        FockSpace::new(ModeLabel::Output, 3).unwrap(),
    ])
    .unwrap();
    let fock = make_state(&StateSpec::Fock(3), &Space::single(ModeLabel::Storage, 8).unwrap())
        .unwrap();
    let vac = make_state(&StateSpec::Fock(0), &Space::single(ModeLabel::Output, 3).unwrap())
        .unwrap();
    let rho0 = tensor(&fock, &vac).unwrap();
    let sched = DriveSchedule::from_conversion_rate(&p, g, 1.0).unwrap();
    let builder =
        HamiltonianBuilder::new(&p, &sched, HamiltonianTerms::default(), &space).unwrap();
    let h = LinearOp::new(space.clone(), builder.at(0.5)).unwrap();
    let collapse = CollapseSpec::new(
        mode_operator(OperatorKind::Annihilate, &space, ModeLabel::Output).unwrap(),
        p.kappa_out,
    )
    .unwrap();
    let grid = time_grid(0.0, us(2.0), 5);
    c.bench_function("lindblad_dim24_2us", |b| {
        b.iter(|| {
            evolve_lindblad(
                black_box(&rho0),
                Hamiltonian::Static(&h),
                std::slice::from_ref(&collapse),
                &grid,
                &SolverOptions::default(),
            )
            .unwrap()
        })
    });
}

fn bench_phase_space(c: &mut Criterion) {
    let space = Space::single(ModeLabel::Itinerant, 15).unwrap();
    let cat = make_state(&StateSpec::Cat(C64::new(2f64.sqrt(), 0.0), CatParity::Even), &space)
        .unwrap();
    let grid = PhaseGrid::default_detection();
    c.bench_function("husimi_81x81_cutoff15", |b| {
        b.iter(|| husimi_q(black_box(&cat), &grid).unwrap())
    });
    c.bench_function("wigner_81x81_cutoff15", |b| {
        b.iter(|| wigner(black_box(&cat), &grid).unwrap())
    });
}

fn bench_sampling(c: &mut Criterion) {
    let space = Space::single(ModeLabel::Itinerant, 15).unwrap();
    let cat = make_state(&StateSpec::Cat(C64::new(2f64.sqrt(), 0.0), CatParity::Odd), &space)
        .unwrap();
    let det = DetectorModel::default();
    let lossy = det.observe(&cat).unwrap();
    c.bench_function("heterodyne_10k_shots", |b| {
        b.iter(|| sample_heterodyne(black_box(&lossy), &det, 10_000, 7).unwrap())
    });
}

fn bench_release(c: &mut Criterion) {
    let space = Space::single(ModeLabel::Storage, 15).unwrap();
    let cat = make_state(&StateSpec::Cat(C64::new(2f64.sqrt(), 0.0), CatParity::Even), &space)
        .unwrap();
    c.bench_function("beam_splitter_release_cutoff15", |b| {
        b.iter(|| apply_release(black_box(&cat), std::f64::consts::FRAC_PI_2).unwrap())
    });
}

fn bench_shaping(c: &mut Criterion) {
    let p = SystemParams::bundled();
    let target = TargetWaveform::gaussian(us(6.0), us(3.0), us(0.5), 0.9, 2000).unwrap();
    c.bench_function("invert_gaussian_2000pts", |b| {
        b.iter(|| invert_for_coupling(black_box(&target), p.kappa_out, 1.0, None).unwrap())
    });
}

criterion_group!(
    benches,
    bench_displacement,
    bench_lindblad,
    bench_phase_space,
    bench_sampling,
    bench_release,
    bench_shaping
);
criterion_main!(benches);
