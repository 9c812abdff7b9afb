//! Dense complex matrix helpers shared by all modules.
//!
//! Everything here operates on `ndarray::Array2<Complex64>`. Hermitian
//! eigendecomposition is delegated to nalgebra; the matrix exponential is a
//! scaling-and-squaring Taylor evaluation, accurate to machine precision for
//! the operator norms that occur at desk scale.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Identity matrix.
pub fn eye(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, ONE))
}

/// Kronecker product, row-major mode ordering.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a vector pair.
pub fn kron_vec(a: &Array1<C64>, b: &Array1<C64>) -> Array1<C64> {
    let mut out = Array1::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// Max absolute entry.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max absolute deviation from the Hermitian part.
pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let ad = adjoint(a);
    max_abs(&(a - &ad)) * 0.5
}

/// 1-norm (max column sum), used to pick the exponential scaling.
fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// The input is scaled so that its 1-norm is below 1/2, the series is summed
/// until terms fall below machine epsilon, and the result is squared back up.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a.mapv(|z| z / cr(2f64.powi(s as i32)));
    let mut result = eye(n);
    let mut term = eye(n);
    for k in 1..60 {
        term = term.dot(&b) / cr(k as f64);
        result += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order together with the corresponding
/// orthonormal eigenvectors as matrix columns.
pub fn eigh(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    let m = nalgebra::DMatrix::<C64>::from_fn(n, n, |i, j| a[(i, j)]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for row in 0..n {
            vecs[(row, col)] = eig.eigenvectors[(row, i)];
        }
    }
    (vals, vecs)
}

/// Eigenvalues only.
pub fn eigvalsh(a: &Array2<C64>) -> Array1<f64> {
    let n = a.nrows();
    let m = nalgebra::DMatrix::<C64>::from_fn(n, n, |i, j| a[(i, j)]);
    let mut vals: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Array1::from(vals)
}

/// Hermitian matrix square root via eigendecomposition.
///
/// Small negative eigenvalues from roundoff are clipped to zero.
pub fn sqrtm_psd(a: &Array2<C64>) -> Array2<C64> {
    let (vals, vecs) = eigh(a);
    let d = Array2::from_diag(&Array1::from_iter(
        vals.iter().map(|&v| cr(v.max(0.0).sqrt())),
    ));
    vecs.dot(&d).dot(&adjoint(&vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_dims_and_values() {
        let a = Array2::from_shape_vec((2, 2), vec![cr(1.0), cr(2.0), cr(3.0), cr(4.0)]).unwrap();
        let id = eye(3);
        let k = kron(&a, &id);
        assert_eq!(k.dim(), (6, 6));
        assert_eq!(k[(0, 0)], cr(1.0));
        assert_eq!(k[(0, 3)], cr(2.0));
        assert_eq!(k[(4, 1)], cr(3.0));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z: Array2<C64> = Array2::zeros((4, 4));
        assert!(max_abs(&(expm(&z) - eye(4))) < 1e-15);
    }

    #[test]
    fn expm_matches_scalar_series() {
        // diag(x) exponentiates elementwise
        let d = Array2::from_diag(&Array1::from(vec![c(0.3, -1.2), c(-2.0, 0.7)]));
        let e = expm(&d);
        assert!((e[(0, 0)] - c(0.3, -1.2).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - c(-2.0, 0.7).exp()).norm() < 1e-13);
    }

    #[test]
    fn expm_antihermitian_is_unitary() {
        // generator alpha a^dag - alpha* a on a small space
        let n = 8;
        let mut g: Array2<C64> = Array2::zeros((n, n));
        let alpha = c(1.3, 0.4);
        for k in 1..n {
            g[(k, k - 1)] = alpha * cr((k as f64).sqrt());
            g[(k - 1, k)] = -alpha.conj() * cr((k as f64).sqrt());
        }
        let u = expm(&g);
        let defect = max_abs(&(u.dot(&adjoint(&u)) - eye(n)));
        assert!(defect < 1e-12, "unitarity defect {defect:.2e}");
    }

    #[test]
    fn eigh_recovers_spectrum() {
        let mut h: Array2<C64> = Array2::zeros((3, 3));
        h[(0, 0)] = cr(1.0);
        h[(1, 1)] = cr(-2.0);
        h[(2, 2)] = cr(0.5);
        h[(0, 1)] = c(0.2, 0.3);
        h[(1, 0)] = c(0.2, -0.3);
        let (vals, vecs) = eigh(&h);
        // reconstruct
        let d = Array2::from_diag(&Array1::from_iter(vals.iter().map(|&v| cr(v))));
        let rec = vecs.dot(&d).dot(&adjoint(&vecs));
        assert!(max_abs(&(rec - &h)) < 1e-12);
        assert!(vals[0] < vals[1] && vals[1] < vals[2]);
    }

    #[test]
    fn sqrtm_squares_back() {
        let mut h: Array2<C64> = Array2::zeros((2, 2));
        h[(0, 0)] = cr(2.0);
        h[(1, 1)] = cr(0.5);
        h[(0, 1)] = c(0.1, 0.05);
        h[(1, 0)] = c(0.1, -0.05);
        let s = sqrtm_psd(&h);
        assert!(max_abs(&(s.dot(&s) - &h)) < 1e-12);
    }
}
