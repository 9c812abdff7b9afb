//! Heterodyne detector model: efficiency loss, shot sampling, Q histograms,
//! marginals, and detector calibration.
//!
//! Samples are complex records S = I + iQ in coherent-amplitude units:
//! integrated heterodyne outcomes are distributed as the Husimi Q density
//! of the loss-transformed state, so the vacuum gives a round Gaussian with
//! total complex variance <|S|^2> = 1 (1/2 per quadrature) and a coherent
//! state |alpha> detected at efficiency eta lands at sqrt(eta) alpha.
//!
//! All randomness flows through ChaCha12 with explicit seeds; shot blocks
//! use independent counter streams so the output is deterministic and
//! identical whether or not blocks run in parallel.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::{gauss2d_fit, FitResult};
use crate::hilbert::{
    single_mode_matrix, FockSpace, ModeLabel, OperatorKind, QuantumState, Space,
};
use crate::linalg::{adjoint, cr, kron, trace};
use crate::phase_space::{husimi_q_point, PhaseGrid};

/// Heterodyne detector: a beam-splitter loss channel in front of an ideal
/// detector, plus optional extra additive Gaussian noise and a demodulation
/// rotation (identity when the residual detuning is zero).
#[derive(Debug, Clone, Copy)]
pub struct DetectorModel {
    pub eta: f64,
    /// Additional per-quadrature Gaussian noise variance on top of the
    /// vacuum noise the loss channel already produces.
    pub extra_noise_var: f64,
    /// Residual demodulation detuning (rad/s) and its reference time;
    /// applies the fixed rotation e^{-i omega t_ref} to every record.
    pub demod_detuning: f64,
    pub demod_time: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            eta: 0.43,
            extra_noise_var: 0.0,
            demod_detuning: 0.0,
            demod_time: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn with_eta(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::EfficiencyOutOfRange(eta));
        }
        Ok(DetectorModel {
            eta,
            ..Default::default()
        })
    }

    /// The state actually seen by the ideal detector.
    pub fn observe(&self, state: &QuantumState) -> Result<QuantumState> {
        loss_channel(state, self.eta)
    }

    fn demod_rotation(&self) -> C64 {
        C64::new(0.0, -self.demod_detuning * self.demod_time).exp()
    }
}

fn require_single_mode(state: &QuantumState) -> Result<()> {
    if state.space().n_modes() != 1 {
        return Err(Error::SpaceMismatch(
            "detection operates on single-mode states".into(),
        ));
    }
    Ok(())
}

/// Amplitude-damping (loss) channel with transmissivity eta via its Kraus
/// family K_k = sum_n sqrt(C(n,k) eta^{n-k} (1-eta)^k) |n-k><n|.
pub fn loss_channel(state: &QuantumState, eta: f64) -> Result<QuantumState> {
    require_single_mode(state)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::EfficiencyOutOfRange(eta));
    }
    let rho = state.density();
    let dim = rho.nrows();
    let mut out = Array2::zeros((dim, dim));
    let loss = 1.0 - eta;
    for k in 0..dim {
        let mut kraus: Array2<C64> = Array2::zeros((dim, dim));
        let mut any = false;
        for n in k..dim {
            let c = binom_f(n, k) * eta.powi((n - k) as i32) * loss.powi(k as i32);
            if c > 0.0 {
                kraus[(n - k, n)] = cr(c.sqrt());
                any = true;
            }
        }
        if !any {
            continue;
        }
        out = out + kraus.dot(&rho).dot(&adjoint(&kraus));
    }
    Ok(QuantumState::from_density_unchecked(
        state.space().clone(),
        out,
    ))
}

/// The same channel built explicitly as a beam splitter into a vacuum
/// environment mode followed by a partial trace; the oracle route for
/// [`loss_channel`].
pub fn loss_channel_beam_splitter(state: &QuantumState, eta: f64) -> Result<QuantumState> {
    require_single_mode(state)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::EfficiencyOutOfRange(eta));
    }
    let dim = state.space().modes()[0].cutoff;
    let label = state.space().modes()[0].label;
    let joint_space = Space::product(&[
        FockSpace::new(label, dim)?,
        FockSpace::new(ModeLabel::Env, dim)?,
    ])?;
    let a = single_mode_matrix(OperatorKind::Annihilate, dim)?;
    let ad = adjoint(&a);
    let lambda = eta.sqrt().acos();
    let gen = kron(&ad, &a).mapv(|z| z * cr(lambda)) - kron(&a, &ad).mapv(|z| z * cr(lambda));
    let u = crate::linalg::expm(&gen);
    let mut vac: Array2<C64> = Array2::zeros((dim, dim));
    vac[(0, 0)] = cr(1.0);
    let joint = kron(&state.density(), &vac);
    let evolved = u.dot(&joint).dot(&adjoint(&u));
    let joint_state = QuantumState::from_density_unchecked(joint_space, evolved);
    crate::hilbert::partial_trace(&joint_state, &[label])
}

fn binom_f(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k.min(n - k) {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Matched temporal-mode envelope f(t) = e^{-kappa t/2} - e^{-kappa_out t/2}
/// with kappa = 4g^2/kappa_out, normalized so sum f^2 dt = 1 on the grid.
pub fn matched_envelope(g: f64, kappa_out: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    if g <= 0.0 {
        return Err(Error::NonPositive("matched envelope needs g > 0", g));
    }
    let kappa = crate::dynamics::induced_rate(g, kappa_out);
    if kappa >= kappa_out {
        return Err(Error::Config(
            "matched envelope degenerates for kappa >= kappa_out".into(),
        ));
    }
    if t_grid.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: t_grid.len(),
        });
    }
    let mut f: Vec<f64> = t_grid
        .iter()
        .map(|&t| (-kappa * t / 2.0).exp() - (-kappa_out * t / 2.0).exp())
        .collect();
    let mut norm2 = 0.0;
    for i in 1..f.len() {
        norm2 += 0.5 * (f[i] * f[i] + f[i - 1] * f[i - 1]) * (t_grid[i] - t_grid[i - 1]);
    }
    let norm = norm2.sqrt().max(1e-300);
    for v in &mut f {
        *v /= norm;
    }
    Ok(f)
}

/// Integrated heterodyne records S = I + iQ.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    pub samples: Vec<C64>,
    pub seed: u64,
    pub eta: f64,
    /// Axis calibration applied to the records (1.0 = already calibrated).
    pub scale: f64,
}

impl ShotSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> C64 {
        if self.samples.is_empty() {
            return cr(0.0);
        }
        self.samples.iter().sum::<C64>() / cr(self.samples.len() as f64)
    }

    /// Per-quadrature variances (I, Q) about the sample mean.
    pub fn quadrature_variances(&self) -> (f64, f64) {
        let m = self.mean();
        let n = self.samples.len().max(1) as f64;
        let vi = self.samples.iter().map(|s| (s.re - m.re).powi(2)).sum::<f64>() / n;
        let vq = self.samples.iter().map(|s| (s.im - m.im).powi(2)).sum::<f64>() / n;
        (vi, vq)
    }

    /// Rescale the axes (from a vacuum calibration).
    pub fn apply_scale(&mut self, scale: f64) {
        for s in &mut self.samples {
            *s *= cr(scale);
        }
        self.scale *= scale;
    }

    /// CSV export: header comments record seed, efficiency, and scale.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# seed={}", self.seed)?;
        writeln!(f, "# eta_det={}", self.eta)?;
        writeln!(f, "# scale={}", self.scale)?;
        writeln!(f, "i,q")?;
        for s in &self.samples {
            writeln!(f, "{:.9e},{:.9e}", s.re, s.im)?;
        }
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut seed = 0u64;
        let mut eta = f64::NAN;
        let mut scale = 1.0;
        let mut samples = Vec::new();
        for line in f.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("seed=") {
                    seed = v.parse().unwrap_or(0);
                } else if let Some(v) = rest.strip_prefix("eta_det=") {
                    eta = v.parse().unwrap_or(f64::NAN);
                } else if let Some(v) = rest.strip_prefix("scale=") {
                    scale = v.parse().unwrap_or(1.0);
                }
                continue;
            }
            if line.is_empty() || line.starts_with('i') {
                continue;
            }
            let mut parts = line.split(',');
            let re: f64 = parts
                .next()
                .ok_or(Error::EmptyData("shot csv"))?
                .trim()
                .parse()
                .map_err(|_| Error::Config("bad shot csv row".into()))?;
            let im: f64 = parts
                .next()
                .ok_or(Error::EmptyData("shot csv"))?
                .trim()
                .parse()
                .map_err(|_| Error::Config("bad shot csv row".into()))?;
            samples.push(C64::new(re, im));
        }
        if samples.is_empty() {
            return Err(Error::EmptyData("shot csv contained no rows"));
        }
        Ok(ShotSet {
            samples,
            seed,
            eta,
            scale,
        })
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

struct Proposal {
    mean: (f64, f64),
    // Cholesky factor of the inflated covariance
    l11: f64,
    l21: f64,
    l22: f64,
    inv: [f64; 3], // s_xx, s_xy, s_yy of the inverse
    log_norm: f64,
}

impl Proposal {
    fn from_state(rho: &Array2<C64>) -> Proposal {
        let dim = rho.nrows();
        let a = single_mode_matrix(OperatorKind::Annihilate, dim).unwrap();
        let mean_a = trace(&a.dot(rho));
        let a2 = a.dot(&a);
        let mean_a2 = trace(&a2.dot(rho));
        let n_op = adjoint(&a).dot(&a);
        let mean_n = trace(&n_op.dot(rho)).re;
        // Q-distribution moments
        let v = mean_n + 1.0 - mean_a.norm_sqr();
        let w = mean_a2 - mean_a * mean_a;
        let mut sxx = (v + w.re) / 2.0;
        let mut syy = (v - w.re) / 2.0;
        let sxy = w.im / 2.0;
        // inflate by 1.5 so proposal tails dominate the target
        sxx = sxx.max(0.5) * 1.5;
        syy = syy.max(0.5) * 1.5;
        let sxy = sxy * 1.5;
        let det = (sxx * syy - sxy * sxy).max(1e-12);
        let l11 = sxx.sqrt();
        let l21 = sxy / l11;
        let l22 = (syy - l21 * l21).max(1e-12).sqrt();
        Proposal {
            mean: (mean_a.re, mean_a.im),
            l11,
            l21,
            l22,
            inv: [syy / det, -sxy / det, sxx / det],
            log_norm: -(std::f64::consts::TAU * det.sqrt()).ln(),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let z1 = standard_normal(rng);
        let z2 = standard_normal(rng);
        (
            self.mean.0 + self.l11 * z1,
            self.mean.1 + self.l21 * z1 + self.l22 * z2,
        )
    }

    fn density(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.mean.0;
        let dy = y - self.mean.1;
        let quad = self.inv[0] * dx * dx + 2.0 * self.inv[1] * dx * dy + self.inv[2] * dy * dy;
        (self.log_norm - 0.5 * quad).exp()
    }
}

const SHOT_BLOCK: usize = 8192;

/// Draw i.i.d. heterodyne records from the Q density of the (already
/// loss-transformed) state by rejection against a moment-matched Gaussian.
///
/// Identical seed, state, and detector give byte-identical output.
pub fn sample_heterodyne(
    state: &QuantumState,
    detector: &DetectorModel,
    n_shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    require_single_mode(state)?;
    if n_shots == 0 {
        return Err(Error::EmptyData("zero shots requested"));
    }
    let rho = state.density();
    let dim = rho.nrows();
    let proposal = Proposal::from_state(&rho);

    // envelope constant from a scan over the proposal's support
    let mut m_env: f64 = 0.0;
    let sx = proposal.l11.max(proposal.l22);
    for i in 0..61 {
        for j in 0..61 {
            let x = proposal.mean.0 + (i as f64 / 30.0 - 1.0) * 6.0 * sx;
            let y = proposal.mean.1 + (j as f64 / 30.0 - 1.0) * 6.0 * sx;
            let q = husimi_q_point(&rho, C64::new(x, y), dim);
            let p = proposal.density(x, y).max(1e-300);
            m_env = m_env.max(q / p);
        }
    }
    let m_env = m_env * 1.3 + 1e-12;

    let n_blocks = n_shots.div_ceil(SHOT_BLOCK);
    let rot = detector.demod_rotation();
    let noise_sd = detector.extra_noise_var.max(0.0).sqrt();
    let blocks: Vec<Result<Vec<C64>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let quota = SHOT_BLOCK.min(n_shots - b * SHOT_BLOCK);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let mut out = Vec::with_capacity(quota);
            let mut draws = 0usize;
            while out.len() < quota {
                let (x, y) = proposal.draw(&mut rng);
                let u: f64 = rng.gen_range(0.0..1.0);
                draws += 1;
                let q = husimi_q_point(&rho, C64::new(x, y), dim);
                let bound = m_env * proposal.density(x, y);
                if q > bound * (1.0 + 1e-9) {
                    return Err(Error::Config(format!(
                        "rejection envelope violated at ({x:.3}, {y:.3}): q={q:.3e} > {bound:.3e}"
                    )));
                }
                if u * bound < q {
                    let mut s = C64::new(x, y) * rot;
                    if noise_sd > 0.0 {
                        s += C64::new(
                            noise_sd * standard_normal(&mut rng),
                            noise_sd * standard_normal(&mut rng),
                        );
                    }
                    out.push(s);
                }
                if draws > 20_000 && (out.len() as f64) < 1e-3 * draws as f64 {
                    return Err(Error::SamplerAcceptanceTooLow(out.len() as f64 / draws as f64));
                }
            }
            Ok(out)
        })
        .collect();

    let mut samples = Vec::with_capacity(n_shots);
    for b in blocks {
        samples.extend(b?);
    }
    Ok(ShotSet {
        samples,
        seed,
        eta: detector.eta,
        scale: 1.0,
    })
}

/// Loss channel followed by sampling: the full measurement pipeline.
pub fn measure(
    state: &QuantumState,
    detector: &DetectorModel,
    n_shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    let observed = detector.observe(state)?;
    sample_heterodyne(&observed, detector, n_shots, seed)
}

/// Binned phase-space probability density.
#[derive(Debug, Clone)]
pub struct QHistogram {
    pub grid: PhaseGrid,
    /// Probability density per bin (normalized by total shot count).
    pub density: Array2<f64>,
    pub n_total: usize,
    pub n_in_range: usize,
}

impl QHistogram {
    /// Fraction of unit probability inside the grid.
    pub fn integral(&self) -> f64 {
        self.n_in_range as f64 / self.n_total as f64
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "re_alpha,im_alpha,value")?;
        let re = self.grid.re_points();
        let im = self.grid.im_points();
        for i in 0..self.grid.n_re {
            for j in 0..self.grid.n_im {
                writeln!(f, "{:.9e},{:.9e},{:.9e}", re[i], im[j], self.density[(i, j)])?;
            }
        }
        Ok(())
    }
}

/// Histogram shots onto a grid; bins are labeled by their centers and the
/// density integrates to the in-range fraction.
pub fn histogram_q(shots: &ShotSet, grid: &PhaseGrid) -> Result<QHistogram> {
    if shots.is_empty() {
        return Err(Error::EmptyData("no shots to histogram"));
    }
    let dre = grid.d_re();
    let dim_ = grid.d_im();
    let mut counts = Array2::<f64>::zeros((grid.n_re, grid.n_im));
    let mut in_range = 0usize;
    for s in &shots.samples {
        let fi = (s.re - grid.re_min) / dre;
        let fj = (s.im - grid.im_min) / dim_;
        if fi < -0.5 || fj < -0.5 {
            continue;
        }
        let i = (fi + 0.5).floor() as isize;
        let j = (fj + 0.5).floor() as isize;
        if i < 0 || j < 0 || i >= grid.n_re as isize || j >= grid.n_im as isize {
            continue;
        }
        counts[(i as usize, j as usize)] += 1.0;
        in_range += 1;
    }
    let norm = shots.len() as f64 * grid.cell_area();
    Ok(QHistogram {
        grid: *grid,
        density: counts.mapv(|c| c / norm),
        n_total: shots.len(),
        n_in_range: in_range,
    })
}

/// Vacuum axis calibration: the factor that maps raw records into units
/// where the vacuum has per-quadrature standard deviation 1/sqrt(2)
/// (total complex variance 1).
#[derive(Debug, Clone, Copy)]
pub struct VacuumCalibration {
    pub scale: f64,
    pub scale_stderr: f64,
    pub reduced_chi2: f64,
}

pub fn vacuum_calibrate(vacuum_shots: &ShotSet) -> Result<VacuumCalibration> {
    let n = vacuum_shots.len();
    if n < 1000 {
        return Err(Error::TooFewPoints {
            needed: 1000,
            got: n,
        });
    }
    let (vi, vq) = vacuum_shots.quadrature_variances();
    let sigma = ((vi + vq) / 2.0).sqrt();
    let scale = std::f64::consts::FRAC_1_SQRT_2 / sigma;
    let scale_stderr = scale / (4.0 * n as f64).sqrt();

    // Gaussian-shape check on the pooled quadrature histogram
    let mut values: Vec<f64> = Vec::with_capacity(2 * n);
    let mean = vacuum_shots.mean();
    for s in &vacuum_shots.samples {
        values.push(s.re - mean.re);
        values.push(s.im - mean.im);
    }
    let n_bins = 41;
    let half = 4.0 * sigma;
    let bw = 2.0 * half / n_bins as f64;
    let mut counts = vec![0.0f64; n_bins];
    for v in &values {
        let b = ((v + half) / bw).floor();
        if b >= 0.0 && (b as usize) < n_bins {
            counts[b as usize] += 1.0;
        }
    }
    let total = values.len() as f64;
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for (b, &c) in counts.iter().enumerate() {
        let lo = -half + b as f64 * bw;
        let hi = lo + bw;
        let p = 0.5 * (erf(hi / (sigma * 2f64.sqrt())) - erf(lo / (sigma * 2f64.sqrt())));
        let expected = total * p;
        if expected > 10.0 {
            chi2 += (c - expected).powi(2) / expected;
            dof += 1;
        }
    }
    let reduced = chi2 / dof.max(1) as f64;
    if reduced > 5.0 {
        return Err(Error::FitResidualTooLarge(reduced, 5.0));
    }
    Ok(VacuumCalibration {
        scale,
        scale_stderr,
        reduced_chi2: reduced,
    })
}

fn erf(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26, |err| < 1.5e-7; fine for a shape check
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Radially integrated angular density Pr(phi) over [0, 2 pi).
#[derive(Debug, Clone)]
pub struct AngularDensity {
    pub phi: Vec<f64>,
    pub density: Vec<f64>,
}

pub fn radial_marginal(hist: &QHistogram, n_phi: usize) -> Result<AngularDensity> {
    if hist.n_in_range == 0 {
        return Err(Error::EmptyData("empty histogram"));
    }
    let dphi = std::f64::consts::TAU / n_phi as f64;
    // bins centered on phi = k dphi so the grid axes do not sit on bin
    // edges; cells are subdivided when they subtend more than a fraction of
    // a bin, which otherwise clumps the lattice angles at small radius
    let mut mass = vec![0.0f64; n_phi];
    let mut central = 0.0f64;
    let re = hist.grid.re_points();
    let im = hist.grid.im_points();
    let (dre, dim_) = (hist.grid.d_re(), hist.grid.d_im());
    let diag = (dre * dre + dim_ * dim_).sqrt();
    let area = hist.grid.cell_area();
    for i in 0..hist.grid.n_re {
        for j in 0..hist.grid.n_im {
            let p = hist.density[(i, j)] * area;
            if p == 0.0 {
                continue;
            }
            let r = (re[i] * re[i] + im[j] * im[j]).sqrt();
            if r < diag {
                central += p;
                continue;
            }
            let width = 2.0 * (diag / 2.0).atan2(r);
            let s = ((width / (dphi / 3.0)).ceil() as usize).clamp(1, 9);
            let pp = p / (s * s) as f64;
            for u in 0..s {
                for v in 0..s {
                    let x = re[i] + ((u as f64 + 0.5) / s as f64 - 0.5) * dre;
                    let y = im[j] + ((v as f64 + 0.5) / s as f64 - 0.5) * dim_;
                    let r_sub = (x * x + y * y).sqrt();
                    if r_sub < diag / s as f64 {
                        central += pp;
                        continue;
                    }
                    let phi = y.atan2(x).rem_euclid(std::f64::consts::TAU);
                    // two offset angular samples per subcell keep exact
                    // lattice directions from piling onto one bin
                    let w_sub = 2.0 * (diag / (2.0 * s as f64)).atan2(r_sub);
                    for m in [-0.25, 0.25] {
                        let pm = (phi + m * w_sub).rem_euclid(std::f64::consts::TAU);
                        let b = ((pm / dphi).floor() as usize) % n_phi;
                        mass[b] += pp / 2.0;
                    }
                }
            }
        }
    }
    Ok(AngularDensity {
        phi: (0..n_phi).map(|b| b as f64 * dphi).collect(),
        density: mass
            .iter()
            .map(|m| (m + central / n_phi as f64) / dphi)
            .collect(),
    })
}

/// Axis to integrate out for a 1D marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalAxis {
    /// Keep I (integrate over Q).
    I,
    /// Keep Q (integrate over I).
    Q,
}

#[derive(Debug, Clone)]
pub struct MarginalDensity {
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
}

pub fn axis_marginal(hist: &QHistogram, axis: MarginalAxis) -> Result<MarginalDensity> {
    if hist.n_in_range == 0 {
        return Err(Error::EmptyData("empty histogram"));
    }
    match axis {
        MarginalAxis::I => {
            let centers = hist.grid.re_points().to_vec();
            let density = (0..hist.grid.n_re)
                .map(|i| hist.density.row(i).sum() * hist.grid.d_im())
                .collect();
            Ok(MarginalDensity { centers, density })
        }
        MarginalAxis::Q => {
            let centers = hist.grid.im_points().to_vec();
            let density = (0..hist.grid.n_im)
                .map(|j| hist.density.column(j).sum() * hist.grid.d_re())
                .collect();
            Ok(MarginalDensity { centers, density })
        }
    }
}

/// Sample estimate of E[e^{-i n phi}] with its standard error; the angular
/// harmonic of Pr(phi).
pub fn angular_harmonic(shots: &ShotSet, n: i32) -> Result<(C64, f64)> {
    if shots.is_empty() {
        return Err(Error::EmptyData("no shots"));
    }
    let vals: Vec<C64> = shots
        .samples
        .iter()
        .map(|s| {
            let phi = s.im.atan2(s.re);
            C64::new(0.0, -(n as f64) * phi).exp()
        })
        .collect();
    let mean: C64 = vals.iter().sum::<C64>() / cr(vals.len() as f64);
    let var: f64 = vals
        .iter()
        .map(|v| (v - mean).norm_sqr())
        .sum::<f64>()
        / vals.len() as f64;
    let stderr = (var / vals.len() as f64).sqrt() / 2f64.sqrt(); // per component
    Ok((mean, stderr))
}

/// Exact E[e^{-i n phi}] under the Q density of a state:
/// sum_m rho_{m, m+n} Gamma(m + n/2 + 1) / sqrt(m! (m+n)!).
pub fn analytic_harmonic(state: &QuantumState, n: usize) -> Result<C64> {
    require_single_mode(state)?;
    let rho = state.density();
    let dim = rho.nrows();
    let mut total = cr(0.0);
    for m in 0..dim.saturating_sub(n) {
        let g = gamma_half(2 * m + n + 2); // Gamma(m + n/2 + 1) with arg doubled
        let denom = (ln_factorial(m) + ln_factorial(m + n)) / 2.0;
        let weight = (g - denom).exp();
        total += rho[(m, m + n)] * cr(weight);
    }
    Ok(total)
}

/// ln Gamma(k/2) for integer k >= 1 (exact via factorial / half-integer
/// closed forms).
fn gamma_half(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        ln_factorial(k / 2 - 1)
    } else {
        // Gamma(j + 1/2) = (2j)! sqrt(pi) / (4^j j!)
        let j = (k - 1) / 2;
        ln_factorial(2 * j) + 0.5 * std::f64::consts::PI.ln()
            - (j as f64) * 4f64.ln()
            - ln_factorial(j)
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Exact Q-density marginal of a state along an axis, on the given centers.
pub fn analytic_axis_marginal(
    state: &QuantumState,
    axis: MarginalAxis,
    centers: &[f64],
) -> Result<Vec<f64>> {
    require_single_mode(state)?;
    let rho = state.density();
    let dim = rho.nrows();
    // integrate Q over the other axis by fine trapezoid
    let half = 8.0;
    let n_int = 801;
    let h = 2.0 * half / (n_int - 1) as f64;
    Ok(centers
        .iter()
        .map(|&c| {
            let mut acc = 0.0;
            for k in 0..n_int {
                let other = -half + k as f64 * h;
                let alpha = match axis {
                    MarginalAxis::I => C64::new(c, other),
                    MarginalAxis::Q => C64::new(other, c),
                };
                let w = if k == 0 || k == n_int - 1 { 0.5 } else { 1.0 };
                acc += w * husimi_q_point(&rho, alpha, dim);
            }
            acc * h
        })
        .collect())
}

/// Detection-efficiency estimate from a known coherent reference.
pub fn fit_detection_efficiency(
    hist: &QHistogram,
    alpha0: C64,
) -> Result<(f64, f64, FitResult)> {
    if alpha0.norm() == 0.0 {
        return Err(Error::NonPositive("reference amplitude", 0.0));
    }
    let re = hist.grid.re_points();
    let im = hist.grid.im_points();
    let mut pts = Vec::with_capacity(hist.grid.n_re * hist.grid.n_im);
    for i in 0..hist.grid.n_re {
        for j in 0..hist.grid.n_im {
            pts.push((re[i], im[j], hist.density[(i, j)]));
        }
    }
    let fit = gauss2d_fit(&pts)?;
    let center = (fit.params[1].powi(2) + fit.params[2].powi(2)).sqrt();
    let eta = (center / alpha0.norm()).powi(2);
    let center_err = ((fit.params[1] * fit.stderr[1]).powi(2)
        + (fit.params[2] * fit.stderr[2]).powi(2))
    .sqrt()
        / center.max(1e-12);
    let eta_err = 2.0 * center * center_err / alpha0.norm_sqr();
    Ok((eta, eta_err, fit))
}

/// Shot-averaged time series of the demodulated signal.
#[derive(Debug, Clone)]
pub struct AveragedSignal {
    pub times: Vec<f64>,
    pub mean_i: Vec<f64>,
    pub mean_q: Vec<f64>,
    pub n_shots: usize,
}

/// Average n_shots noisy records of a mean waveform: each time bin carries
/// sqrt(eta) <b_out(t)> plus white Gaussian noise sized so an integrated
/// shot reproduces the loss-channel vacuum variance (1/2 per quadrature
/// after matched-filter integration).
pub fn average_signal(
    waveform: &crate::release::Waveform,
    detector: &DetectorModel,
    n_shots: usize,
    seed: u64,
) -> Result<AveragedSignal> {
    if n_shots == 0 {
        return Err(Error::EmptyData("zero shots requested"));
    }
    let nt = waveform.times.len();
    if nt < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: nt });
    }
    let dt = waveform.times[1] - waveform.times[0];
    let noise_sd = (1.0 / (2.0 * dt)).sqrt();
    let root_eta = detector.eta.sqrt();
    let rot = detector.demod_rotation();
    let mut sum_i = vec![0.0f64; nt];
    let mut sum_q = vec![0.0f64; nt];
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..n_shots {
        for k in 0..nt {
            let s = waveform.values[k] * cr(root_eta) * rot;
            sum_i[k] += s.re + noise_sd * standard_normal(&mut rng);
            sum_q[k] += s.im + noise_sd * standard_normal(&mut rng);
        }
    }
    let n = n_shots as f64;
    Ok(AveragedSignal {
        times: waveform.times.clone(),
        mean_i: sum_i.into_iter().map(|v| v / n).collect(),
        mean_q: sum_q.into_iter().map(|v| v / n).collect(),
        n_shots,
    })
}
