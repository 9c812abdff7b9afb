//! Truncated-Fock-space linear algebra: modes, operators, states.
//!
//! A [`Space`] is an ordered tensor product of labeled Fock modes with
//! individual cutoffs. Operators and states carry their space so that
//! dimension and label mismatches are caught at the boundary instead of
//! deep inside a solver.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, cr, eye, kron, kron_vec, max_abs, trace, ZERO};

/// Default tolerance on the top-Fock-level population at state construction.
pub const DEFAULT_LEAK_TOL: f64 = 1e-6;

/// The four physical modes of the release chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeLabel {
    /// `a` - high-Q storage cavity holding the state.
    Storage,
    /// `b` - low-Q output resonator coupled to the transmission line.
    Output,
    /// `b_out` - itinerant temporal mode carrying the released wavepacket.
    Itinerant,
    /// `e` - fictitious environment port of the detection beam splitter.
    Env,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModeLabel::Storage => "a",
            ModeLabel::Output => "b",
            ModeLabel::Itinerant => "b_out",
            ModeLabel::Env => "e",
        };
        write!(f, "{s}")
    }
}

/// A single truncated Fock mode: levels |0> .. |cutoff-1>.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    pub label: ModeLabel,
    pub cutoff: usize,
}

impl FockSpace {
    pub fn new(label: ModeLabel, cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::CutoffTooSmall(cutoff));
        }
        Ok(FockSpace { label, cutoff })
    }
}

/// Ordered tensor product of Fock modes with distinct labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    modes: Vec<FockSpace>,
}

impl Space {
    pub fn single(label: ModeLabel, cutoff: usize) -> Result<Self> {
        Ok(Space {
            modes: vec![FockSpace::new(label, cutoff)?],
        })
    }

    pub fn product(modes: &[FockSpace]) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if m.cutoff < 2 {
                return Err(Error::CutoffTooSmall(m.cutoff));
            }
            if modes[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::DuplicateMode(m.label.to_string()));
            }
        }
        Ok(Space {
            modes: modes.to_vec(),
        })
    }

    pub fn modes(&self) -> &[FockSpace] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.modes.iter().map(|m| m.cutoff).product()
    }

    pub fn contains(&self, label: ModeLabel) -> bool {
        self.modes.iter().any(|m| m.label == label)
    }

    pub fn index_of(&self, label: ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    /// Row-major strides of the mode indices within the flat basis index.
    fn strides(&self) -> Vec<usize> {
        let n = self.modes.len();
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.modes[i + 1].cutoff;
        }
        s
    }

    /// Decompose a flat basis index into per-mode occupation numbers.
    fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.modes.len());
        for s in self.strides() {
            out.push(idx / s);
            idx %= s;
        }
        out
    }
}

/// A dense operator on a composite space.
#[derive(Debug, Clone)]
pub struct LinearOp {
    space: Space,
    matrix: Array2<C64>,
}

impl LinearOp {
    pub fn new(space: Space, matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: matrix.nrows(),
            });
        }
        Ok(LinearOp { space, matrix })
    }

    pub fn identity(space: Space) -> Self {
        let d = space.dim();
        LinearOp {
            space,
            matrix: eye(d),
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        LinearOp {
            space: self.space.clone(),
            matrix: adjoint(&self.matrix),
        }
    }

    pub fn dot(&self, other: &LinearOp) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch("operator product".into()));
        }
        Ok(LinearOp {
            space: self.space.clone(),
            matrix: self.matrix.dot(&other.matrix),
        })
    }

    pub fn scale(&self, z: C64) -> Self {
        LinearOp {
            space: self.space.clone(),
            matrix: self.matrix.mapv(|v| v * z),
        }
    }

    pub fn add(&self, other: &LinearOp) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch("operator sum".into()));
        }
        Ok(LinearOp {
            space: self.space.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    /// U^dag U = 1 within `tol` (max-abs entry).
    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.space.dim();
        max_abs(&(adjoint(&self.matrix).dot(&self.matrix) - eye(d))) < tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_defect(&self.matrix) < tol
    }
}

/// Bosonic operator kinds for [`mode_operator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    Annihilate,
    Create,
    Number,
    Parity,
    Displacement(C64),
}

/// Single-mode matrix of `kind` on a `cutoff`-dimensional Fock space.
pub fn single_mode_matrix(kind: OperatorKind, cutoff: usize) -> Result<Array2<C64>> {
    if cutoff < 2 {
        return Err(Error::CutoffTooSmall(cutoff));
    }
    let m = match kind {
        OperatorKind::Annihilate => {
            let mut a = Array2::zeros((cutoff, cutoff));
            for n in 1..cutoff {
                a[(n - 1, n)] = cr((n as f64).sqrt());
            }
            a
        }
        OperatorKind::Create => adjoint(&single_mode_matrix(OperatorKind::Annihilate, cutoff)?),
        OperatorKind::Number => {
            Array2::from_diag(&Array1::from_iter((0..cutoff).map(|n| cr(n as f64))))
        }
        OperatorKind::Parity => Array2::from_diag(&Array1::from_iter(
            (0..cutoff).map(|n| cr(if n % 2 == 0 { 1.0 } else { -1.0 })),
        )),
        OperatorKind::Displacement(alpha) => {
            if !alpha.re.is_finite() || !alpha.im.is_finite() {
                return Err(Error::NonPositive("displacement amplitude must be finite", f64::NAN));
            }
            // exp(alpha a^dag - alpha* a) by scaling and squaring; exactly
            // unitary on the truncated space since the generator is
            // anti-Hermitian.
            let a = single_mode_matrix(OperatorKind::Annihilate, cutoff)?;
            let ad = adjoint(&a);
            let gen = ad.mapv(|z| z * alpha) - a.mapv(|z| z * alpha.conj());
            linalg::expm(&gen)
        }
    };
    Ok(m)
}

/// Mode operator embedded into a composite space via identities.
///
/// `<n-1| a |n> = sqrt(n)` on the target mode, identity elsewhere.
pub fn mode_operator(kind: OperatorKind, space: &Space, target: ModeLabel) -> Result<LinearOp> {
    let pos = space.index_of(target)?;
    let mut acc: Option<Array2<C64>> = None;
    for (i, m) in space.modes().iter().enumerate() {
        let f = if i == pos {
            single_mode_matrix(kind, m.cutoff)?
        } else {
            eye(m.cutoff)
        };
        acc = Some(match acc {
            None => f,
            Some(prev) => kron(&prev, &f),
        });
    }
    LinearOp::new(space.clone(), acc.unwrap())
}

/// Parity sector of a cat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatParity {
    Even,
    Odd,
}

/// State constructors understood by [`make_state`].
#[derive(Debug, Clone)]
pub enum StateSpec {
    /// Fock state |n>.
    Fock(usize),
    /// Coherent state |alpha>.
    Coherent(C64),
    /// (|0> + |n>)/sqrt(2).
    FockSuperposition(usize),
    /// N (|alpha> + |-alpha>) (even) or N (|alpha> - |-alpha>) (odd).
    Cat(C64, CatParity),
    /// Arbitrary ket, normalized on construction.
    Custom(Array1<C64>),
}

/// Exact coherent-state coefficients e^{-|a|^2/2} a^n / sqrt(n!) up to `dim`.
///
/// Not re-normalized after truncation; the discarded tail is what the
/// leakage check guards against.
pub fn coherent_coefficients(alpha: C64, dim: usize) -> Array1<C64> {
    let mut v = Array1::zeros(dim);
    let pref = cr((-alpha.norm_sqr() / 2.0).exp());
    v[0] = pref;
    for n in 1..dim {
        v[n] = v[n - 1] * alpha / cr((n as f64).sqrt());
    }
    v
}

/// Smallest cutoff for which a coherent state of amplitude `alpha` keeps its
/// top-level population below `tol`.
pub fn required_cutoff_for_coherent(alpha: C64, tol: f64) -> usize {
    let nbar = alpha.norm_sqr();
    let mut p = (-nbar).exp(); // Poisson P(0)
    let mut n = 0usize;
    loop {
        n += 1;
        p *= nbar / n as f64;
        if p < tol && n as f64 > nbar {
            return (n + 1).max(2);
        }
        if n > 10_000 {
            return n;
        }
    }
}

/// Either a pure ket or a density operator on a composite space.
#[derive(Debug, Clone)]
pub enum Repr {
    Ket(Array1<C64>),
    Density(Array2<C64>),
}

#[derive(Debug, Clone)]
pub struct QuantumState {
    space: Space,
    repr: Repr,
}

impl QuantumState {
    /// Wrap a ket, checking normalization and truncation leakage.
    pub fn from_ket(space: Space, ket: Array1<C64>, leak_tol: f64) -> Result<Self> {
        if ket.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: ket.len(),
            });
        }
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "ket norm {norm} deviates from 1 by more than 1e-9"
            )));
        }
        let state = QuantumState {
            space,
            repr: Repr::Ket(ket.mapv(|z| z / cr(norm))),
        };
        state.check_leakage(leak_tol)?;
        Ok(state)
    }

    /// Wrap a density operator, checking trace, Hermiticity, positivity, and
    /// truncation leakage.
    pub fn from_density(space: Space, rho: Array2<C64>, leak_tol: f64) -> Result<Self> {
        if rho.nrows() != space.dim() || rho.ncols() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: rho.nrows(),
            });
        }
        let tr = trace(&rho);
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::InvalidState(format!(
                "trace {tr} deviates from 1 by more than 1e-8"
            )));
        }
        if linalg::hermiticity_defect(&rho) > 1e-8 {
            return Err(Error::InvalidState("density operator not Hermitian".into()));
        }
        let min_eig = linalg::eigvalsh(&rho)[0];
        if min_eig < -1e-8 {
            return Err(Error::InvalidState(format!(
                "min eigenvalue {min_eig:.3e} below -1e-8"
            )));
        }
        let state = QuantumState {
            space,
            repr: Repr::Density(rho),
        };
        state.check_leakage(leak_tol)?;
        Ok(state)
    }

    /// Density operator without the positivity eigen-check; used internally
    /// where positivity holds by construction.
    pub(crate) fn from_density_unchecked(space: Space, rho: Array2<C64>) -> Self {
        QuantumState {
            space,
            repr: Repr::Density(rho),
        }
    }

    /// Ket without validation; for internal combinations of already-valid
    /// states.
    pub(crate) fn from_ket_unchecked(space: Space, ket: Array1<C64>) -> Self {
        QuantumState {
            space,
            repr: Repr::Ket(ket),
        }
    }

    /// The same amplitudes on a different (equal-dimension) space, e.g. a
    /// cavity state re-read as an itinerant-mode target.
    pub fn relabeled(&self, space: Space) -> Result<Self> {
        if space.dim() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                got: space.dim(),
            });
        }
        Ok(QuantumState {
            space,
            repr: self.repr.clone(),
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn is_pure_repr(&self) -> bool {
        matches!(self.repr, Repr::Ket(_))
    }

    pub fn ket(&self) -> Option<&Array1<C64>> {
        match &self.repr {
            Repr::Ket(v) => Some(v),
            Repr::Density(_) => None,
        }
    }

    /// Density operator (outer product for kets).
    pub fn density(&self) -> Array2<C64> {
        match &self.repr {
            Repr::Ket(v) => {
                let d = v.len();
                let mut rho = Array2::zeros((d, d));
                for i in 0..d {
                    for j in 0..d {
                        rho[(i, j)] = v[i] * v[j].conj();
                    }
                }
                rho
            }
            Repr::Density(r) => r.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// <op> for this state.
    pub fn expect(&self, op: &LinearOp) -> Result<C64> {
        if op.space() != &self.space {
            return Err(Error::SpaceMismatch("expectation value".into()));
        }
        Ok(match &self.repr {
            Repr::Ket(v) => {
                let w = op.matrix().dot(v);
                v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum()
            }
            Repr::Density(r) => trace(&op.matrix().dot(r)),
        })
    }

    /// Marginal photon-number distribution of one mode.
    pub fn photon_distribution(&self, label: ModeLabel) -> Result<Vec<f64>> {
        let pos = self.space.index_of(label)?;
        let cutoff = self.space.modes()[pos].cutoff;
        let mut dist = vec![0.0; cutoff];
        match &self.repr {
            Repr::Ket(v) => {
                for (idx, z) in v.iter().enumerate() {
                    dist[self.space.unravel(idx)[pos]] += z.norm_sqr();
                }
            }
            Repr::Density(r) => {
                for idx in 0..r.nrows() {
                    dist[self.space.unravel(idx)[pos]] += r[(idx, idx)].re;
                }
            }
        }
        Ok(dist)
    }

    /// Population of Fock level `n` of one mode.
    pub fn mode_population(&self, label: ModeLabel, n: usize) -> Result<f64> {
        Ok(self.photon_distribution(label)?.get(n).copied().unwrap_or(0.0))
    }

    pub fn purity(&self) -> f64 {
        match &self.repr {
            Repr::Ket(_) => 1.0,
            Repr::Density(r) => trace(&r.dot(r)).re,
        }
    }

    fn check_leakage(&self, tol: f64) -> Result<()> {
        for m in self.space.modes() {
            let p_top = self.mode_population(m.label, m.cutoff - 1)?;
            if p_top >= tol {
                // crude hint: grow until the observed tail would fit
                let required = m.cutoff + ((p_top / tol).log2().ceil() as usize).max(1) + 2;
                return Err(Error::LeakageAboveTol {
                    mode: m.label.to_string(),
                    leakage: p_top,
                    tol,
                    required_cutoff: required,
                });
            }
        }
        Ok(())
    }
}

/// Build a named state on a (single-mode) space with the default leakage
/// tolerance.
pub fn make_state(spec: &StateSpec, space: &Space) -> Result<QuantumState> {
    make_state_tol(spec, space, DEFAULT_LEAK_TOL)
}

pub fn make_state_tol(spec: &StateSpec, space: &Space, leak_tol: f64) -> Result<QuantumState> {
    let dim = space.dim();
    let ket: Array1<C64> = match spec {
        StateSpec::Fock(n) => {
            if *n >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: *n + 1,
                });
            }
            let mut v = Array1::zeros(dim);
            v[*n] = cr(1.0);
            v
        }
        StateSpec::Coherent(alpha) => {
            let v = coherent_coefficients(*alpha, dim);
            let tail = 1.0 - v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if tail >= leak_tol || v[dim - 1].norm_sqr() >= leak_tol {
                return Err(Error::LeakageAboveTol {
                    mode: space.modes()[0].label.to_string(),
                    leakage: tail.max(v[dim - 1].norm_sqr()),
                    tol: leak_tol,
                    required_cutoff: required_cutoff_for_coherent(*alpha, leak_tol),
                });
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.mapv(|z| z / cr(norm))
        }
        StateSpec::FockSuperposition(n) => {
            if *n >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: *n + 1,
                });
            }
            let mut v = Array1::zeros(dim);
            let r = cr(std::f64::consts::FRAC_1_SQRT_2);
            v[0] = r;
            v[*n] = r;
            v
        }
        StateSpec::Cat(alpha, parity) => {
            let plus = coherent_coefficients(*alpha, dim);
            let minus = coherent_coefficients(-*alpha, dim);
            let sign = match parity {
                CatParity::Even => cr(1.0),
                CatParity::Odd => cr(-1.0),
            };
            let v = &plus + &minus.mapv(|z| z * sign);
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::InvalidState("cat amplitude too small: state vanishes".into()));
            }
            let v = v.mapv(|z| z / cr(norm));
            if v[dim - 1].norm_sqr() >= leak_tol {
                return Err(Error::LeakageAboveTol {
                    mode: space.modes()[0].label.to_string(),
                    leakage: v[dim - 1].norm_sqr(),
                    tol: leak_tol,
                    required_cutoff: required_cutoff_for_coherent(*alpha, leak_tol) + 2,
                });
            }
            v
        }
        StateSpec::Custom(ket) => {
            let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::InvalidState("custom ket has zero norm".into()));
            }
            ket.mapv(|z| z / cr(norm))
        }
    };
    QuantumState::from_ket(space.clone(), ket, leak_tol)
}

/// Tensor product of two states on disjoint label sets.
pub fn tensor(s1: &QuantumState, s2: &QuantumState) -> Result<QuantumState> {
    for m in s2.space().modes() {
        if s1.space().contains(m.label) {
            return Err(Error::DuplicateMode(m.label.to_string()));
        }
    }
    let modes: Vec<FockSpace> = s1
        .space()
        .modes()
        .iter()
        .chain(s2.space().modes())
        .cloned()
        .collect();
    let space = Space::product(&modes)?;
    Ok(match (&s1.repr, &s2.repr) {
        (Repr::Ket(a), Repr::Ket(b)) => {
            QuantumState::from_ket_unchecked(space, kron_vec(a, b))
        }
        _ => {
            let rho = kron(&s1.density(), &s2.density());
            QuantumState::from_density_unchecked(space, rho)
        }
    })
}

/// Trace out every mode not in `keep`, preserving the original mode order.
pub fn partial_trace(state: &QuantumState, keep: &[ModeLabel]) -> Result<QuantumState> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    for &l in keep {
        state.space.index_of(l)?;
    }
    let modes = state.space.modes();
    let kept: Vec<usize> = (0..modes.len())
        .filter(|&i| keep.contains(&modes[i].label))
        .collect();
    let traced: Vec<usize> = (0..modes.len()).filter(|i| !kept.contains(i)).collect();
    if traced.is_empty() {
        return Ok(state.clone());
    }

    let strides = state.space.strides();
    let kept_dims: Vec<usize> = kept.iter().map(|&i| modes[i].cutoff).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| modes[i].cutoff).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // flat index of a (kept multi-index, traced multi-index) pair
    let flatten = |kidx: usize, tidx: usize| -> usize {
        let mut rem_k = kidx;
        let mut rem_t = tidx;
        let mut flat = 0usize;
        for (pos, &mode_i) in kept.iter().enumerate().rev() {
            let d = kept_dims[pos];
            flat += (rem_k % d) * strides[mode_i];
            rem_k /= d;
        }
        for (pos, &mode_i) in traced.iter().enumerate().rev() {
            let d = traced_dims[pos];
            flat += (rem_t % d) * strides[mode_i];
            rem_t /= d;
        }
        flat
    };

    let rho = state.density();
    let mut out = Array2::zeros((dk, dk));
    for i in 0..dk {
        for j in 0..dk {
            let mut s = ZERO;
            for t in 0..dt {
                s += rho[(flatten(i, t), flatten(j, t))];
            }
            out[(i, j)] = s;
        }
    }
    let kept_modes: Vec<FockSpace> = kept.iter().map(|&i| modes[i]).collect();
    Ok(QuantumState::from_density_unchecked(
        Space::product(&kept_modes)?,
        out,
    ))
}

/// Uhlmann fidelity; |<psi|phi>|^2 for pure states, <psi|rho|psi> for a
/// pure/mixed pair.
pub fn fidelity(s1: &QuantumState, s2: &QuantumState) -> Result<f64> {
    if s1.space().dim() != s2.space().dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.space().dim(),
            got: s2.space().dim(),
        });
    }
    let f = match (&s1.repr, &s2.repr) {
        (Repr::Ket(a), Repr::Ket(b)) => {
            let ip: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
            ip.norm_sqr()
        }
        (Repr::Ket(a), Repr::Density(r)) | (Repr::Density(r), Repr::Ket(a)) => {
            let w = r.dot(a);
            a.iter()
                .zip(w.iter())
                .map(|(x, y)| x.conj() * y)
                .sum::<C64>()
                .re
        }
        (Repr::Density(r1), Repr::Density(r2)) => {
            let s = linalg::sqrtm_psd(r1);
            let inner = s.dot(r2).dot(&s);
            let vals = linalg::eigvalsh(&inner);
            let tr: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
            tr * tr
        }
    };
    Ok(f.clamp(0.0, 1.0 + 1e-9).min(1.0))
}
