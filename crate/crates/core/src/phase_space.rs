//! Husimi Q and Wigner functions on rectangular phase-space grids.
//!
//! Q(alpha) = <alpha|rho|alpha>/pi is evaluated from exact coherent-state
//! coefficients; W(alpha) = (2/pi) tr[rho D(alpha) P D(alpha)^dag] uses the
//! exact displaced-Fock matrix elements built by recurrence, so neither
//! function inherits error from the truncated displacement exponential.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hilbert::{coherent_coefficients, QuantumState};
use crate::linalg::cr;

/// Rectangular grid in the complex alpha plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl PhaseGrid {
    /// Square grid centered on the origin, `n` points per axis.
    pub fn square(half_extent: f64, n: usize) -> Self {
        PhaseGrid {
            re_min: -half_extent,
            re_max: half_extent,
            im_min: -half_extent,
            im_max: half_extent,
            n_re: n,
            n_im: n,
        }
    }

    /// Default detection grid: [-4, 4]^2 with 81 x 81 points.
    pub fn default_detection() -> Self {
        PhaseGrid::square(4.0, 81)
    }

    pub fn re_points(&self) -> Array1<f64> {
        Array1::linspace(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_points(&self) -> Array1<f64> {
        Array1::linspace(self.im_min, self.im_max, self.n_im)
    }

    pub fn d_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn d_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.d_re() * self.d_im()
    }
}

/// A sampled scalar field over a [`PhaseGrid`].
///
/// `values[(i, j)]` is the field at re = re_points[i], im = im_points[j].
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub grid: PhaseGrid,
    pub values: Array2<f64>,
    /// Trapezoid-free Riemann integral over the grid.
    pub integral: f64,
    /// False when more than 1e-2 of the unit normalization is missing,
    /// i.e. the grid is too small for the state's support.
    pub covers_support: bool,
}

impl PhaseField {
    fn from_values(grid: PhaseGrid, values: Array2<f64>) -> Self {
        let integral = values.sum() * grid.cell_area();
        PhaseField {
            grid,
            values,
            integral,
            covers_support: (1.0 - integral).abs() <= 1e-2,
        }
    }

    /// Maximum value and its grid location (re, im).
    pub fn peak(&self) -> (f64, f64, f64) {
        let re = self.grid.re_points();
        let im = self.grid.im_points();
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..self.grid.n_re {
            for j in 0..self.grid.n_im {
                if self.values[(i, j)] > best.0 {
                    best = (self.values[(i, j)], re[i], im[j]);
                }
            }
        }
        best
    }

    /// CSV export: `re_alpha,im_alpha,value` rows.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "re_alpha,im_alpha,value")?;
        let re = self.grid.re_points();
        let im = self.grid.im_points();
        for i in 0..self.grid.n_re {
            for j in 0..self.grid.n_im {
                writeln!(f, "{:.9e},{:.9e},{:.9e}", re[i], im[j], self.values[(i, j)])?;
            }
        }
        Ok(())
    }
}

fn single_mode_density(state: &QuantumState) -> Result<Array2<C64>> {
    if state.space().n_modes() != 1 {
        return Err(Error::SpaceMismatch(
            "phase-space functions need a single-mode state".into(),
        ));
    }
    Ok(state.density())
}

/// Husimi Q-function, Q(alpha) = <alpha|rho|alpha>/pi.
pub fn husimi_q(state: &QuantumState, grid: &PhaseGrid) -> Result<PhaseField> {
    let rho = single_mode_density(state)?;
    let dim = rho.nrows();
    let re = grid.re_points();
    let im = grid.im_points();
    let rows: Vec<Vec<f64>> = (0..grid.n_re)
        .into_par_iter()
        .map(|i| {
            (0..grid.n_im)
                .map(|j| {
                    let alpha = C64::new(re[i], im[j]);
                    husimi_q_point(&rho, alpha, dim)
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((grid.n_re, grid.n_im));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(PhaseField::from_values(*grid, values))
}

/// Q at a single point; exposed for samplers.
pub fn husimi_q_point(rho: &Array2<C64>, alpha: C64, dim: usize) -> f64 {
    let v = coherent_coefficients(alpha, dim);
    let w = rho.dot(&v);
    let q: C64 = v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
    q.re / std::f64::consts::PI
}

/// Exact displaced-Fock matrix <m|D(alpha)|n> for m, n < dim.
///
/// Built column-by-column from D a^dag = (a^dag - alpha*) D, which only ever
/// references rows at or below the current one, so the truncated block is
/// exact rather than an approximation of the exponential.
pub fn displaced_fock_matrix(alpha: C64, dim: usize) -> Array2<C64> {
    let mut d = Array2::zeros((dim, dim));
    let col0 = coherent_coefficients(alpha, dim);
    for m in 0..dim {
        d[(m, 0)] = col0[m];
    }
    for n in 0..dim - 1 {
        let s = cr(1.0 / ((n + 1) as f64).sqrt());
        for m in 0..dim {
            let raise = if m > 0 {
                cr((m as f64).sqrt()) * d[(m - 1, n)]
            } else {
                C64::new(0.0, 0.0)
            };
            d[(m, n + 1)] = (raise - alpha.conj() * d[(m, n)]) * s;
        }
    }
    d
}

/// Wigner function via the displaced-parity formula.
pub fn wigner(state: &QuantumState, grid: &PhaseGrid) -> Result<PhaseField> {
    let rho = single_mode_density(state)?;
    let dim = rho.nrows();
    let re = grid.re_points();
    let im = grid.im_points();
    let rows: Vec<Vec<f64>> = (0..grid.n_re)
        .into_par_iter()
        .map(|i| {
            (0..grid.n_im)
                .map(|j| {
                    let alpha = C64::new(re[i], im[j]);
                    wigner_point(&rho, alpha, dim)
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((grid.n_re, grid.n_im));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(PhaseField::from_values(*grid, values))
}

fn wigner_point(rho: &Array2<C64>, alpha: C64, dim: usize) -> f64 {
    // D(alpha) P D(alpha)^dag = D(2 alpha) P, so
    // W = (2/pi) tr[rho D(2 alpha) P] = (2/pi) sum_{m,n} rho_mn (-1)^m <n|D(2a)|m>,
    // exact for a finitely supported rho since the D elements are exact.
    let d = displaced_fock_matrix(alpha * cr(2.0), dim);
    let mut w = 0.0;
    for m in 0..dim {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in 0..dim {
            w += sign * (rho[(m, n)] * d[(n, m)]).re;
        }
    }
    2.0 / std::f64::consts::PI * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_state, CatParity, ModeLabel, Space, StateSpec};
    use crate::linalg::cr;

    fn single(cutoff: usize) -> Space {
        Space::single(ModeLabel::Itinerant, cutoff).unwrap()
    }

    #[test]
    fn vacuum_q_is_unit_gaussian() {
        let vac = make_state(&StateSpec::Fock(0), &single(6)).unwrap();
        let grid = PhaseGrid::square(4.0, 61);
        let q = husimi_q(&vac, &grid).unwrap();
        let (peak, re, im) = q.peak();
        assert!((peak - 1.0 / std::f64::consts::PI).abs() < 1e-10);
        assert!(re.abs() < 1e-12 && im.abs() < 1e-12);
        assert!((q.integral - 1.0).abs() < 1e-3);
        assert!(q.covers_support);
        // closed form at a probe point
        let probe = q.values[(40, 30)];
        let a = C64::new(grid.re_points()[40], grid.im_points()[30]);
        assert!((probe - (-a.norm_sqr()).exp() / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn q_of_coherent_peaks_at_alpha() {
        let st = make_state(&StateSpec::Coherent(cr(1.0)), &single(15)).unwrap();
        let grid = PhaseGrid::square(4.0, 81);
        let q = husimi_q(&st, &grid).unwrap();
        let (_, re, im) = q.peak();
        assert!((re - 1.0).abs() < grid.d_re() / 2.0 + 1e-12);
        assert!(im.abs() < grid.d_im() / 2.0 + 1e-12);
    }

    #[test]
    fn q_is_nonnegative_and_normalized() {
        let st = make_state(&StateSpec::Cat(cr(2f64.sqrt()), CatParity::Even), &single(18)).unwrap();
        let q = husimi_q(&st, &PhaseGrid::square(5.0, 81)).unwrap();
        assert!(q.values.iter().all(|&v| v >= -1e-12));
        assert!((q.integral - 1.0).abs() < 1e-3);
    }

    #[test]
    fn small_grid_flags_missing_support() {
        let st = make_state(&StateSpec::Coherent(cr(2.0)), &single(25)).unwrap();
        let q = husimi_q(&st, &PhaseGrid::square(1.0, 21)).unwrap();
        assert!(!q.covers_support);
    }

    #[test]
    fn wigner_of_vacuum() {
        let vac = make_state(&StateSpec::Fock(0), &single(6)).unwrap();
        let grid = PhaseGrid::square(4.0, 41);
        let w = wigner(&vac, &grid).unwrap();
        let (peak, _, _) = w.peak();
        assert!((peak - 2.0 / std::f64::consts::PI).abs() < 1e-10);
        assert!((w.integral - 1.0).abs() < 1e-3);
    }

    #[test]
    fn odd_cat_wigner_negative_at_origin() {
        let st = make_state(&StateSpec::Cat(cr(2f64.sqrt()), CatParity::Odd), &single(18)).unwrap();
        let w = wigner(&st, &PhaseGrid::square(4.5, 61)).unwrap();
        // parity eigenstate with eigenvalue -1: W(0) = -2/pi exactly
        let i0 = 30; // center index of 61-point symmetric grid
        let w0 = w.values[(i0, i0)];
        assert!(w0 < 0.0);
        assert!((w0 + 2.0 / std::f64::consts::PI).abs() < 1e-9, "W(0) = {w0}");
        assert!((w.integral - 1.0).abs() < 1e-3);
    }

    #[test]
    fn wigner_is_real_even_for_complex_states() {
        // fock superposition has interference fringes; field must stay real
        // and normalized
        let st = make_state(&StateSpec::FockSuperposition(3), &single(12)).unwrap();
        let w = wigner(&st, &PhaseGrid::square(4.0, 51)).unwrap();
        assert!((w.integral - 1.0).abs() < 1e-3);
        assert!(w.values.iter().any(|&v| v < -1e-3), "expected negativity");
    }

    #[test]
    fn displaced_fock_matrix_is_unitary_block() {
        // columns of the exact D matrix are orthonormal wherever the
        // displaced states fit inside the cutoff
        let d = displaced_fock_matrix(C64::new(0.7, -0.4), 25);
        for n in 0..6 {
            for m in 0..6 {
                let ip: C64 = d
                    .column(n)
                    .iter()
                    .zip(d.column(m).iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expect = if n == m { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-10 && ip.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn csv_round_trip_shape() {
        let vac = make_state(&StateSpec::Fock(0), &single(4)).unwrap();
        let q = husimi_q(&vac, &PhaseGrid::square(2.0, 11)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        q.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "re_alpha,im_alpha,value");
        assert_eq!(lines.count(), 121);
    }
}
