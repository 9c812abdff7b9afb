//! Cavity measurement models and conditional itinerant states.
//!
//! The transmon is treated as a classical readout channel: every basis is
//! realized as an ideal projector pair composed with a 2x2 assignment
//! confusion matrix built from the readout fidelities F_e and F_g. The
//! coherent basis keeps the physical |<alpha|-alpha>| overlap rather than
//! symmetrizing it away, and can include the Kerr dwell the hardware incurs
//! between release and readout.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_coefficients, ModeLabel, QuantumState, Space,
};
use crate::linalg::{adjoint, cr, eye, max_abs, trace};

/// Measurement bases for the storage cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CavityBasis {
    /// "Does the cavity hold exactly n photons?"
    Number(usize),
    /// Probe (|0> + e^{i pi s}|1>)/sqrt(2); `plus` selects the + state.
    Superpos01 { plus: bool },
    /// Probe (|0> +- |2>)/sqrt(2).
    Superpos02 { plus: bool },
    /// Displace by +alpha and ask for vacuum: clicks on |-alpha>, the
    /// no-click outcome is associated with |+alpha>.
    CoherentPair { alpha: C64 },
    /// Even/odd photon number; click on even.
    Parity,
}

/// Kerr evolution between state preparation and readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrDwell {
    pub duration: f64,
    pub chi_aa: f64,
}

/// A basis plus the classical assignment errors of the transmon readout.
#[derive(Debug, Clone)]
pub struct CavityMeasurement {
    pub basis: CavityBasis,
    /// P(assign click | true click), 0.99 for the measured device.
    pub fidelity_e: f64,
    /// P(assign no-click | true no-click), 0.96 for the measured device.
    pub fidelity_g: f64,
    pub kerr_dwell: Option<KerrDwell>,
}

impl CavityMeasurement {
    pub fn new(basis: CavityBasis, fidelity_e: f64, fidelity_g: f64) -> Result<Self> {
        for (row, f) in [(0usize, fidelity_e), (1usize, fidelity_g)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::NotRowStochastic { row, sum: f });
            }
        }
        Ok(CavityMeasurement {
            basis,
            fidelity_e,
            fidelity_g,
            kerr_dwell: None,
        })
    }

    /// Perfect assignment.
    pub fn ideal(basis: CavityBasis) -> Self {
        CavityMeasurement {
            basis,
            fidelity_e: 1.0,
            fidelity_g: 1.0,
            kerr_dwell: None,
        }
    }

    pub fn with_dwell(mut self, dwell: KerrDwell) -> Self {
        self.kerr_dwell = Some(dwell);
        self
    }
}

/// One POVM outcome on the cavity mode.
#[derive(Debug, Clone)]
pub struct PovmElement {
    pub label: String,
    pub op: Array2<C64>,
}

fn projector_from_ket(ket: &ndarray::Array1<C64>) -> Array2<C64> {
    let d = ket.len();
    let mut p = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            p[(i, j)] = ket[i] * ket[j].conj();
        }
    }
    p
}

fn ideal_click_projector(basis: &CavityBasis, cutoff: usize) -> Result<(Array2<C64>, String, String)> {
    match basis {
        CavityBasis::Number(n) => {
            if *n >= cutoff {
                return Err(Error::DimensionMismatch {
                    expected: cutoff,
                    got: n + 1,
                });
            }
            let mut p = Array2::zeros((cutoff, cutoff));
            p[(*n, *n)] = cr(1.0);
            Ok((p, format!("n{n}"), format!("not_n{n}")))
        }
        CavityBasis::Superpos01 { plus } => {
            let mut ket = ndarray::Array1::zeros(cutoff);
            let r = cr(std::f64::consts::FRAC_1_SQRT_2);
            ket[0] = r;
            ket[1] = if *plus { r } else { -r };
            let lbl = if *plus { "plus01" } else { "minus01" };
            let other = if *plus { "not_plus01" } else { "not_minus01" };
            Ok((projector_from_ket(&ket), lbl.into(), other.into()))
        }
        CavityBasis::Superpos02 { plus } => {
            let mut ket = ndarray::Array1::zeros(cutoff);
            let r = cr(std::f64::consts::FRAC_1_SQRT_2);
            ket[0] = r;
            ket[2] = if *plus { r } else { -r };
            let lbl = if *plus { "plus02" } else { "minus02" };
            let other = if *plus { "not_plus02" } else { "not_minus02" };
            Ok((projector_from_ket(&ket), lbl.into(), other.into()))
        }
        CavityBasis::CoherentPair { alpha } => {
            // displace by +alpha, project on vacuum: coherent projector at
            // -alpha (kept non-orthogonal, |<alpha|-alpha>|^2 = e^{-4|a|^2})
            let ket = coherent_coefficients(-*alpha, cutoff);
            Ok((projector_from_ket(&ket), "minus_alpha".into(), "plus_alpha".into()))
        }
        CavityBasis::Parity => {
            let mut p = Array2::zeros((cutoff, cutoff));
            for n in (0..cutoff).step_by(2) {
                p[(n, n)] = cr(1.0);
            }
            Ok((p, "even".into(), "odd".into()))
        }
    }
}

/// The two-outcome POVM of a measurement setting: the ideal projector pair
/// folded through the assignment confusion, E_click = F_e P + (1-F_g)(1-P).
pub fn cavity_povm(meas: &CavityMeasurement, cutoff: usize) -> Result<Vec<PovmElement>> {
    let (p, click_label, no_label) = ideal_click_projector(&meas.basis, cutoff)?;
    let one = eye(cutoff);
    let q = &one - &p;
    let e_click = p.mapv(|z| z * cr(meas.fidelity_e)) + q.mapv(|z| z * cr(1.0 - meas.fidelity_g));
    let e_no = p.mapv(|z| z * cr(1.0 - meas.fidelity_e)) + q.mapv(|z| z * cr(meas.fidelity_g));
    Ok(vec![
        PovmElement {
            label: click_label,
            op: e_click,
        },
        PovmElement {
            label: no_label,
            op: e_no,
        },
    ])
}

/// Outcome probability and the conditional itinerant state after the cavity
/// outcome is recorded and the cavity discarded.
#[derive(Debug, Clone)]
pub struct ConditionalResult {
    pub label: String,
    pub probability: f64,
    pub field_state: QuantumState,
}

fn joint_dims(joint: &QuantumState) -> Result<(usize, usize)> {
    if joint.space().n_modes() != 2
        || joint.space().modes()[0].label != ModeLabel::Storage
        || joint.space().modes()[1].label != ModeLabel::Itinerant
    {
        return Err(Error::SpaceMismatch(
            "conditioning expects a storage (x) itinerant joint state".into(),
        ));
    }
    Ok((
        joint.space().modes()[0].cutoff,
        joint.space().modes()[1].cutoff,
    ))
}

/// Born-rule conditioning: P = tr[(E (x) 1) rho], field state
/// Tr_a[(E (x) 1) rho] / P.
pub fn condition_on_cavity(joint: &QuantumState, element: &PovmElement) -> Result<ConditionalResult> {
    let (da, db) = joint_dims(joint)?;
    if element.op.nrows() != da {
        return Err(Error::DimensionMismatch {
            expected: da,
            got: element.op.nrows(),
        });
    }
    let rho = joint.density();
    // Tr_a[(E (x) 1) rho]: block (m,i),(k,j) weighted by E[k,m]
    let mut field: Array2<C64> = Array2::zeros((db, db));
    for m in 0..da {
        for k in 0..da {
            let w = element.op[(k, m)];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..db {
                for j in 0..db {
                    field[(i, j)] += w * rho[(m * db + i, k * db + j)];
                }
            }
        }
    }
    let p = trace(&field).re;
    if p < 1e-12 {
        return Err(Error::OutcomeTooUnlikely(p));
    }
    let field = field.mapv(|z| z / cr(p));
    // enforce exact Hermiticity against roundoff
    let field = (&field + &adjoint(&field)).mapv(|z| z * cr(0.5));
    Ok(ConditionalResult {
        label: element.label.clone(),
        probability: p,
        field_state: QuantumState::from_density_unchecked(
            Space::single(ModeLabel::Itinerant, db)?,
            field,
        ),
    })
}

/// Apply a measurement (optional Kerr dwell, then its POVM) to the joint
/// state; outcome probabilities sum to one.
pub fn measurement_statistics(
    joint: &QuantumState,
    meas: &CavityMeasurement,
) -> Result<Vec<ConditionalResult>> {
    let (da, _) = joint_dims(joint)?;
    let state = match meas.kerr_dwell {
        Some(d) => kerr_dwell_on_joint(joint, d.duration, d.chi_aa)?,
        None => joint.clone(),
    };
    let povm = cavity_povm(meas, da)?;
    povm.iter().map(|e| condition_on_cavity(&state, e)).collect()
}

/// Unitary self-Kerr evolution exp[-i (chi_aa/2) a^dag2 a^2 t] on a
/// single-mode cavity state.
pub fn kerr_dwell(state: &QuantumState, duration: f64, chi_aa: f64) -> Result<QuantumState> {
    if state.space().n_modes() != 1 {
        return Err(Error::SpaceMismatch("kerr_dwell expects a single mode".into()));
    }
    let dim = state.dim();
    let phases: Vec<C64> = (0..dim)
        .map(|n| C64::new(0.0, -chi_aa / 2.0 * (n * (n.saturating_sub(1))) as f64 * duration).exp())
        .collect();
    if let Some(ket) = state.ket() {
        let out = ndarray::Array1::from_iter(ket.iter().zip(&phases).map(|(v, ph)| v * ph));
        return Ok(QuantumState::from_ket_unchecked(state.space().clone(), out));
    }
    let rho = state.density();
    let mut out = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            out[(i, j)] = phases[i] * rho[(i, j)] * phases[j].conj();
        }
    }
    Ok(QuantumState::from_density_unchecked(
        state.space().clone(),
        out,
    ))
}

/// The same dwell acting on the cavity factor of a joint state.
pub fn kerr_dwell_on_joint(joint: &QuantumState, duration: f64, chi_aa: f64) -> Result<QuantumState> {
    let (da, db) = joint_dims(joint)?;
    let phases: Vec<C64> = (0..da)
        .map(|n| C64::new(0.0, -chi_aa / 2.0 * (n * (n.saturating_sub(1))) as f64 * duration).exp())
        .collect();
    let rho = joint.density();
    let mut out = Array2::zeros((da * db, da * db));
    for ma in 0..da {
        for ka in 0..da {
            let w = phases[ma] * phases[ka].conj();
            for i in 0..db {
                for j in 0..db {
                    out[(ma * db + i, ka * db + j)] = w * rho[(ma * db + i, ka * db + j)];
                }
            }
        }
    }
    Ok(QuantumState::from_density_unchecked(
        joint.space().clone(),
        out,
    ))
}

/// The probabilities entering the Bell-fidelity lower bound, in the order
/// (0, 1, +, -): the normalized setting probabilities P_a and the matched
/// field conditionals P_b(flip(i) | i_a) for the number settings and
/// P_b(i | i_a) for the rotated ones.
#[derive(Debug, Clone, Copy)]
pub struct BellData {
    /// P_a(0), P_a(1), P_a(+), P_a(-).
    pub p_a: [f64; 4],
    /// P_b(1|0_a), P_b(0|1_a), P_b(+|+_a), P_b(-|-_a).
    pub p_b: [f64; 4],
    /// Effective sample counts behind each conditional (binomial errors).
    pub n: [f64; 4],
}

/// Strict lower bound on the Bell-state fidelity:
/// F >= 1/2 [ P_a(0) P_b(1|0) + P_a(1) P_b(0|1)
///            - 2 sqrt(P_a(0) P_b(0|0) P_a(1) P_b(1|1))
///            + P_a(+) P_b(+|+) + P_a(-) P_b(-|-)
///            - P_a(-) P_b(+|-) - P_a(+) P_b(-|+) ],
/// with the complements supplied as 1 - p. Returns the bound and its
/// binomially propagated standard error.
pub fn bell_bound(data: &BellData) -> Result<(f64, f64)> {
    for p in data.p_a.iter().chain(data.p_b.iter()) {
        if !(0.0..=1.0).contains(p) {
            return Err(Error::Config(format!("probability {p} outside [0, 1]")));
        }
    }
    let f = |pa: [f64; 4], pb: [f64; 4]| -> f64 {
        0.5 * (pa[0] * pb[0] + pa[1] * pb[1]
            - 2.0 * (pa[0] * (1.0 - pb[0]) * pa[1] * (1.0 - pb[1])).max(0.0).sqrt()
            + pa[2] * pb[2]
            + pa[3] * pb[3]
            - pa[3] * (1.0 - pb[3])
            - pa[2] * (1.0 - pb[2]))
    };
    let value = f(data.p_a, data.p_b);
    // delta method with binomial variances on the field conditionals and
    // the setting probabilities
    let mut var = 0.0;
    for k in 0..4 {
        let h = 1e-6;
        let mut pb_hi = data.p_b;
        pb_hi[k] = (pb_hi[k] + h).min(1.0);
        let mut pb_lo = data.p_b;
        pb_lo[k] = (pb_lo[k] - h).max(0.0);
        let grad = (f(data.p_a, pb_hi) - f(data.p_a, pb_lo)) / (pb_hi[k] - pb_lo[k]);
        let n = data.n[k].max(1.0);
        var += grad * grad * data.p_b[k] * (1.0 - data.p_b[k]) / n;

        let mut pa_hi = data.p_a;
        pa_hi[k] = (pa_hi[k] + h).min(1.0);
        let mut pa_lo = data.p_a;
        pa_lo[k] = (pa_lo[k] - h).max(0.0);
        let grad_a = (f(pa_hi, data.p_b) - f(pa_lo, data.p_b)) / (pa_hi[k] - pa_lo[k]);
        var += grad_a * grad_a * data.p_a[k] * (1.0 - data.p_a[k]) / n;
    }
    Ok((value, var.sqrt()))
}

/// Constrained least squares of a measured 1D marginal against
/// alpha D_i + (1 - alpha) D_ibar; alpha is the conditional probability
/// P_b(i | i_a).
///
/// `n_shots` sizes the per-bin counting errors for the returned standard
/// error and the chi^2 gate.
pub fn fit_mixing_fraction(
    centers: &[f64],
    measured: &[f64],
    d_i: &[f64],
    d_ibar: &[f64],
    n_shots: usize,
) -> Result<(f64, f64)> {
    let k = measured.len();
    if k < 3 || d_i.len() != k || d_ibar.len() != k || centers.len() != k {
        return Err(Error::TooFewPoints { needed: 3, got: k });
    }
    let dx = (centers[k - 1] - centers[0]) / (k - 1) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..k {
        let basis = d_i[j] - d_ibar[j];
        num += (measured[j] - d_ibar[j]) * basis;
        den += basis * basis;
    }
    if den < 1e-300 {
        return Err(Error::DegenerateSweep);
    }
    let alpha = (num / den).clamp(0.0, 1.0);
    // counting error per density bin: sigma_j^2 = p_j / (N dx^2)
    let mut var_alpha = 0.0;
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for j in 0..k {
        let basis = d_i[j] - d_ibar[j];
        let fit = alpha * d_i[j] + (1.0 - alpha) * d_ibar[j];
        let sigma2 = (fit.max(1e-9) * dx) / (n_shots as f64) / (dx * dx);
        var_alpha += basis * basis * sigma2;
        if fit * dx * n_shots as f64 > 10.0 {
            chi2 += (measured[j] - fit).powi(2) / sigma2;
            dof += 1;
        }
    }
    let stderr = var_alpha.sqrt() / den;
    let reduced = chi2 / dof.max(1) as f64;
    if reduced > 5.0 {
        return Err(Error::FitResidualTooLarge(reduced, 5.0));
    }
    Ok((alpha, stderr))
}

/// POVM completeness check: sum of elements equals identity within tol.
pub fn povm_is_complete(povm: &[PovmElement], tol: f64) -> bool {
    if povm.is_empty() {
        return false;
    }
    let d = povm[0].op.nrows();
    let mut acc: Array2<C64> = Array2::zeros((d, d));
    for e in povm {
        acc += &e.op;
    }
    max_abs(&(acc - eye(d))) < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fidelity, make_state, partial_trace, CatParity, StateSpec};
    use crate::release::apply_release;
    use crate::units::us;

    fn storage(cutoff: usize) -> Space {
        Space::single(ModeLabel::Storage, cutoff).unwrap()
    }

    #[test]
    fn all_povms_are_complete() {
        let bases = [
            CavityBasis::Number(0),
            CavityBasis::Number(1),
            CavityBasis::Superpos01 { plus: true },
            CavityBasis::Superpos02 { plus: false },
            CavityBasis::CoherentPair { alpha: cr(1.0) },
            CavityBasis::Parity,
        ];
        for basis in bases {
            let meas = CavityMeasurement::new(basis, 0.99, 0.96).unwrap();
            let povm = cavity_povm(&meas, 12).unwrap();
            assert!(povm_is_complete(&povm, 1e-9), "{basis:?}");
            // all elements positive semidefinite
            for e in &povm {
                let vals = crate::linalg::eigvalsh(&e.op);
                assert!(vals[0] > -1e-12, "{basis:?} {}: min eig {}", e.label, vals[0]);
            }
        }
    }

    #[test]
    fn number_basis_elements_are_diagonal() {
        let meas = CavityMeasurement::new(CavityBasis::Number(1), 0.99, 0.96).unwrap();
        let povm = cavity_povm(&meas, 6).unwrap();
        for e in &povm {
            for i in 0..6 {
                for j in 0..6 {
                    if i != j {
                        assert_eq!(e.op[(i, j)], C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn parity_povm_confusion_on_fock2() {
        let two = make_state(&StateSpec::Fock(2), &storage(6)).unwrap();
        let meas = CavityMeasurement::new(CavityBasis::Parity, 0.99, 0.96).unwrap();
        let povm = cavity_povm(&meas, 6).unwrap();
        // <2| E_even |2> = F_e
        let p_even = two.expect(&crate::hilbert::LinearOp::new(storage(6), povm[0].op.clone()).unwrap())
            .unwrap()
            .re;
        assert!((p_even - 0.99).abs() < 1e-12);
    }

    #[test]
    fn coherent_povm_on_cat_is_slightly_asymmetric() {
        let cat = make_state(&StateSpec::Cat(cr(2f64.sqrt()), CatParity::Even), &storage(16)).unwrap();
        let meas = CavityMeasurement::ideal(CavityBasis::CoherentPair { alpha: cr(1.0) });
        let povm = cavity_povm(&meas, 16).unwrap();
        let p_click = cat
            .expect(&crate::hilbert::LinearOp::new(storage(16), povm[0].op.clone()).unwrap())
            .unwrap()
            .re;
        // |<-1|cat>|^2 with the +-sqrt(2) blobs probed at +-1: near 1/2 but
        // pulled down by the coherent-state overlap structure
        assert!(p_click > 0.40 && p_click < 0.50, "P(click) = {p_click:.4}");
        // the two overlap conventions the analysis reports
        let amp_overlap = (-2.0f64).exp(); // |<1|-1>|
        let prob_overlap = (-4.0f64).exp(); // |<1|-1>|^2
        assert!((amp_overlap - 0.1353).abs() < 1e-4);
        assert!((prob_overlap - 0.0183).abs() < 1e-4);
    }

    #[test]
    fn bell_state_number_conditioning() {
        let one = make_state(&StateSpec::Fock(1), &storage(4)).unwrap();
        let joint = apply_release(&one, std::f64::consts::FRAC_PI_2).unwrap();
        let meas = CavityMeasurement::ideal(CavityBasis::Number(0));
        let results = measurement_statistics(&joint, &meas).unwrap();
        let click = &results[0];
        assert!((click.probability - 0.5).abs() < 1e-9);
        let target = make_state(&StateSpec::Fock(1), &Space::single(ModeLabel::Itinerant, 4).unwrap())
            .unwrap();
        assert!(fidelity(&click.field_state, &target).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn bell_state_rotated_conditioning() {
        let one = make_state(&StateSpec::Fock(1), &storage(4)).unwrap();
        let joint = apply_release(&one, std::f64::consts::FRAC_PI_2).unwrap();
        let meas = CavityMeasurement::ideal(CavityBasis::Superpos01 { plus: true });
        let results = measurement_statistics(&joint, &meas).unwrap();
        let click = &results[0];
        assert!((click.probability - 0.5).abs() < 1e-9);
        // (|1,0> + |0,1>)/sqrt2 = (|+,+> - |-,->)/sqrt2: finding + leaves +
        let mut ket = ndarray::Array1::zeros(4);
        ket[0] = cr(std::f64::consts::FRAC_1_SQRT_2);
        ket[1] = cr(std::f64::consts::FRAC_1_SQRT_2);
        let target = QuantumState::from_ket(
            Space::single(ModeLabel::Itinerant, 4).unwrap(),
            ket,
            1.0,
        )
        .unwrap();
        assert!(
            fidelity(&click.field_state, &target).unwrap() > 1.0 - 1e-9,
            "field does not match the like-signed superposition"
        );
    }

    #[test]
    fn half_released_cat_parity_conditioning() {
        let cat = make_state(&StateSpec::Cat(cr(2f64.sqrt()), CatParity::Even), &storage(15)).unwrap();
        let joint = apply_release(&cat, std::f64::consts::FRAC_PI_2).unwrap();
        let meas = CavityMeasurement::ideal(CavityBasis::Parity);
        let results = measurement_statistics(&joint, &meas).unwrap();
        let itin_space = Space::single(ModeLabel::Itinerant, 15).unwrap();
        for (res, parity) in results.iter().zip([CatParity::Even, CatParity::Odd]) {
            let target = make_state(&StateSpec::Cat(cr(1.0), parity), &storage(15))
                .unwrap()
                .relabeled(itin_space.clone())
                .unwrap();
            let f = fidelity(&res.field_state, &target).unwrap();
            assert!(f > 0.99, "{}: fidelity {f:.5}", res.label);
        }
        // total parity conservation: cavity even <-> field even exactly
        let even_field_parity: f64 = results[0]
            .field_state
            .photon_distribution(ModeLabel::Itinerant)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
            .sum();
        assert!((even_field_parity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conditionals_average_to_unconditional() {
        let cat = make_state(&StateSpec::Cat(cr(1.0), CatParity::Odd), &storage(12)).unwrap();
        let joint = apply_release(&cat, 1.0).unwrap();
        let meas = CavityMeasurement::new(CavityBasis::Parity, 0.99, 0.96).unwrap();
        let results = measurement_statistics(&joint, &meas).unwrap();
        let total_p: f64 = results.iter().map(|r| r.probability).sum();
        assert!((total_p - 1.0).abs() < 1e-9);
        let mut avg: Array2<C64> = Array2::zeros((12, 12));
        for r in &results {
            avg = avg + r.field_state.density().mapv(|z| z * cr(r.probability));
        }
        let uncond = partial_trace(&joint, &[ModeLabel::Itinerant]).unwrap();
        assert!(max_abs(&(avg - uncond.density())) < 1e-9);
    }

    #[test]
    fn ideal_bell_statistics_give_unit_bound() {
        let data = BellData {
            p_a: [0.5, 0.5, 0.5, 0.5],
            p_b: [1.0, 1.0, 1.0, 1.0],
            n: [1e9; 4],
        };
        let (f, err) = bell_bound(&data).unwrap();
        assert!((f - 1.0).abs() < 1e-9, "F = {f}");
        assert!(err < 1e-3);
    }

    #[test]
    fn product_state_statistics_stay_classical() {
        // cavity |0>, field |1> deterministically: no rotated-basis
        // correlation, P_b(+|+) = P_b(-|-) = 1/2
        let data = BellData {
            p_a: [1.0, 0.0, 0.5, 0.5],
            p_b: [1.0, 0.0, 0.5, 0.5],
            n: [1e9; 4],
        };
        let (f, _) = bell_bound(&data).unwrap();
        assert!(f <= 0.5 + 1e-9, "classical data must stay below 0.5, got {f}");
        // fully mixed statistics
        let mixed = BellData {
            p_a: [0.5; 4],
            p_b: [0.5; 4],
            n: [1e9; 4],
        };
        let (fm, _) = bell_bound(&mixed).unwrap();
        assert!(fm <= 0.25 + 1e-9, "mixed data F = {fm}");
    }

    #[test]
    fn mixing_fraction_recovery() {
        use rand::{Rng, SeedableRng};
        let centers: Vec<f64> = (0..81).map(|i| -4.0 + i as f64 * 0.1).collect();
        let gauss = |mu: f64| -> Vec<f64> {
            centers
                .iter()
                .map(|&x| (-(x - mu) * (x - mu)).exp() / std::f64::consts::PI.sqrt())
                .collect()
        };
        let d_i = gauss(0.66);
        let d_ibar = gauss(-0.66);
        for (truth, tol) in [(0.9, 0.012), (1.0, 0.008), (0.5, 0.012)] {
            // synthetic counting noise at 1e5 shots
            let n = 100_000usize;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
            let measured: Vec<f64> = d_i
                .iter()
                .zip(&d_ibar)
                .map(|(a, b)| {
                    let m = truth * a + (1.0 - truth) * b;
                    let sigma = (m.max(1e-9) * 0.1 / n as f64).sqrt() / 0.1;
                    (m + sigma * rng.gen_range(-1.732..1.732)).max(0.0)
                })
                .collect();
            let (alpha, err) = fit_mixing_fraction(&centers, &measured, &d_i, &d_ibar, n).unwrap();
            assert!(
                (alpha - truth).abs() < tol,
                "truth {truth}: alpha {alpha:.4} +- {err:.4}"
            );
        }
    }

    #[test]
    fn kerr_dwell_identity_and_revival() {
        let p = crate::model::SystemParams::bundled();
        let coh = make_state(&StateSpec::Coherent(cr(1.0)), &storage(14)).unwrap();
        let same = kerr_dwell(&coh, 0.0, p.chi.aa).unwrap();
        assert!(fidelity(&coh, &same).unwrap() > 1.0 - 1e-12);
        let revival = kerr_dwell(&coh, std::f64::consts::TAU / p.chi.aa.abs(), p.chi.aa).unwrap();
        assert!(fidelity(&coh, &revival).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn kerr_dwell_contrast_loss_at_3us() {
        let p = crate::model::SystemParams::bundled();
        let coh = make_state(&StateSpec::Coherent(cr(1.0)), &storage(16)).unwrap();
        let evolved = kerr_dwell(&coh, us(3.0), p.chi.aa).unwrap();
        let overlap = fidelity(&coh, &evolved).unwrap();
        // independent series oracle: |<alpha| e^{-i chi/2 n(n-1) t} |alpha>|^2
        let theta = p.chi.aa / 2.0 * us(3.0);
        let mut acc = C64::new(0.0, 0.0);
        let nbar = 1.0f64;
        for n in 0..16usize {
            let ln_pn = -nbar + (n as f64) * nbar.ln()
                - (2..=n).map(|k| (k as f64).ln()).sum::<f64>();
            acc += cr(ln_pn.exp()) * C64::new(0.0, -theta * (n * (n.saturating_sub(1))) as f64).exp();
        }
        let expected = acc.norm_sqr();
        assert!(
            (overlap - expected).abs() < 1e-9,
            "overlap {overlap:.6} vs series {expected:.6}"
        );
        // the dwell visibly reduces the coherent-basis contrast
        assert!(overlap < 0.9 && overlap > 0.75, "overlap {overlap:.4}");
    }

    #[test]
    fn undefined_conditional_is_rejected() {
        let vac = make_state(&StateSpec::Fock(0), &storage(4)).unwrap();
        let joint = apply_release(&vac, 1.0).unwrap();
        let meas = CavityMeasurement::ideal(CavityBasis::Number(3));
        let povm = cavity_povm(&meas, 4).unwrap();
        assert!(matches!(
            condition_on_cavity(&joint, &povm[0]),
            Err(Error::OutcomeTooUnlikely(_))
        ));
    }
}
