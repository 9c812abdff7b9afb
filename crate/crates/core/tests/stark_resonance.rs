//! With the pump Stark shifts enabled, the conversion resonance moves away
//! from zero relative detuning: the fitted decay rate versus delta peaks
//! where the pump-frequency difference matches the shifted mode splitting,
//! delta* = d omega_b - d omega_a.

use qlaunch::dynamics::{
    evolve_lindblad, induced_rate, time_grid, CollapseSpec, Hamiltonian, SolverOptions,
};
use qlaunch::fit::{log_exponential_fit, lorentzian_fit};
use qlaunch::hilbert::{
    make_state, mode_operator, tensor, FockSpace, ModeLabel, OperatorKind, Space, StateSpec,
};
use qlaunch::model::{DriveSchedule, HamiltonianBuilder, HamiltonianTerms, SystemParams};
use qlaunch::units::{khz, to_khz};

#[test]
fn resonance_offset_matches_stark_shift_difference() {
    let p = SystemParams::bundled();
    let g = khz(54.0);
    let kappa = induced_rate(g, p.kappa_out);
    let space = Space::product(&[
        FockSpace::new(ModeLabel::Storage, 3).unwrap(),
        FockSpace::new(ModeLabel::Output, 3).unwrap(),
    ])
    .unwrap();
    let one = make_state(&StateSpec::Fock(1), &Space::single(ModeLabel::Storage, 3).unwrap())
        .unwrap();
    let vac = make_state(&StateSpec::Fock(0), &Space::single(ModeLabel::Output, 3).unwrap())
        .unwrap();
    let rho0 = tensor(&one, &vac).unwrap();
    let collapse = CollapseSpec::new(
        mode_operator(OperatorKind::Annihilate, &space, ModeLabel::Output).unwrap(),
        p.kappa_out,
    )
    .unwrap();

    let sched0 = DriveSchedule::from_conversion_rate(&p, g, 1.0).unwrap();
    let shifts = sched0.stark_at(&p.chi, 0.5);
    let delta_star = shifts.b - shifts.a;
    // symmetric pump split at 54 kHz puts the resonance near +174 kHz
    assert!(to_khz(delta_star) > 100.0 && to_khz(delta_star) < 250.0);

    let terms = HamiltonianTerms {
        conversion: true,
        stark: true,
        self_kerr: false,
        cross_kerr: false,
    };
    let span = p.kappa_out; // sweep +- kappa_out around the expected peak
    let n_pts = 13;
    let mut deltas = Vec::new();
    let mut rates = Vec::new();
    for i in 0..n_pts {
        let delta = delta_star - span + 2.0 * span * i as f64 / (n_pts - 1) as f64;
        let sched = DriveSchedule::from_conversion_rate(&p, g, 1.0)
            .unwrap()
            .with_delta(delta);
        let builder = HamiltonianBuilder::new(&p, &sched, terms, &space).unwrap();
        let h_fn = |t: f64| builder.at(t);
        let grid = time_grid(0.0, 2.5 / kappa, 51);
        let sol = evolve_lindblad(
            &rho0,
            Hamiltonian::TimeDep(&h_fn),
            std::slice::from_ref(&collapse),
            &grid,
            &SolverOptions::default(),
        )
        .unwrap();
        let p1 = sol.populations(ModeLabel::Storage, 1).unwrap();
        deltas.push(delta);
        rates.push(log_exponential_fit(&grid, &p1).unwrap().params[1]);
    }
    let fit = lorentzian_fit(&deltas, &rates).unwrap();
    let peak_khz = to_khz(fit.params[1]);
    let expected_khz = to_khz(delta_star);
    assert!(
        (peak_khz - expected_khz).abs() < 10.0,
        "resonance at {peak_khz:.1} kHz, Stark-shift difference predicts {expected_khz:.1} kHz"
    );
    println!(
        "stark resonance: peak {peak_khz:.1} kHz vs d(omega_b - omega_a)/2pi = {expected_khz:.1} kHz"
    );
}
