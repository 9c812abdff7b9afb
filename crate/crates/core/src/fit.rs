//! Small least-squares toolbox: closed-form linear fits and a damped
//! (Levenberg-Marquardt) nonlinear fitter with the handful of model shapes
//! the analysis chain needs.

use crate::error::{Error, Result};

/// Parameter estimates with covariance-derived standard errors.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof > 0 {
            self.chi2 / self.dof as f64
        } else {
            self.chi2
        }
    }
}

fn check_points(n: usize, n_params: usize) -> Result<()> {
    if n < n_params + 2 {
        return Err(Error::TooFewPoints {
            needed: n_params + 2,
            got: n,
        });
    }
    Ok(())
}

/// y = p0 + p1 x by ordinary least squares (closed form).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(x.len(), 2)?;
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::DegenerateSweep);
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy * sxx - sx * sxy) / det;
    let chi2: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - intercept - slope * xi;
            r * r
        })
        .sum();
    let dof = x.len() - 2;
    let s2 = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let stderr_slope = (s2 * n / det).sqrt();
    let stderr_intercept = (s2 * sxx / det).sqrt();
    Ok(FitResult {
        params: vec![intercept, slope],
        stderr: vec![stderr_intercept, stderr_slope],
        chi2,
        dof,
        iterations: 0,
    })
}

/// Solve a small dense linear system in place (Gauss-Jordan with partial
/// pivoting). Returns None if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        for j in col..n {
            a[col][j] /= p;
        }
        b[col] /= p;
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in col..n {
                        a[i][j] -= f * a[col][j];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    Some(b)
}

fn invert_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = solve_dense(a.to_vec(), e)?;
        for i in 0..n {
            inv[i][k] = col[i];
        }
    }
    Some(inv)
}

const LM_MAX_ITER: usize = 300;

/// Damped least squares on an arbitrary scalar model y = f(p, x).
///
/// `sigma`, when given, weights residuals as (y - f)/sigma and the returned
/// standard errors are absolute; otherwise errors are scaled by the a
/// posteriori variance chi2/dof.
pub fn levenberg_marquardt<F>(
    model: F,
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    p0: &[f64],
) -> Result<FitResult>
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = x.len();
    let np = p0.len();
    check_points(n, np)?;
    let w = |i: usize| sigma.map(|s| 1.0 / s[i]).unwrap_or(1.0);

    let chi2_of = |p: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (&xi, &yi))| {
                let r = (yi - model(p, xi)) * w(i);
                r * r
            })
            .sum()
    };

    let mut p = p0.to_vec();
    let mut chi2 = chi2_of(&p);
    let mut lambda = 1e-3;
    // converged-at-roundoff floor for noiseless data
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let chi2_floor = x.len() as f64 * (1e-12 * y_scale).powi(2);

    for iter in 0..LM_MAX_ITER {
        let iterations = iter + 1;
        // numeric Jacobian
        let mut jac = vec![vec![0.0; np]; n];
        for k in 0..np {
            let h = 1e-6 * p[k].abs().max(1e-8);
            let mut pp = p.clone();
            pp[k] += h;
            let mut pm = p.clone();
            pm[k] -= h;
            for (i, &xi) in x.iter().enumerate() {
                jac[i][k] = (model(&pp, xi) - model(&pm, xi)) / (2.0 * h) * w(i);
            }
        }
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for (i, &xi) in x.iter().enumerate() {
            let r = (y[i] - model(&p, xi)) * w(i);
            for a in 0..np {
                jtr[a] += jac[i][a] * r;
                for b in 0..np {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
            let _ = xi;
        }

        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj.clone();
            for a in 0..np {
                damped[a][a] += lambda * jtj[a][a].max(1e-300);
            }
            let Some(step) = solve_dense(damped, jtr.clone()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            let trial_chi2 = chi2_of(&trial);
            if trial_chi2.is_finite() && trial_chi2 < chi2 {
                let rel = (chi2 - trial_chi2) / chi2.max(1e-300);
                p = trial;
                chi2 = trial_chi2;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-10 || chi2 < chi2_floor {
                    return finalize(model, x, sigma, p, chi2, iterations);
                }
                break;
            } else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    // stuck: accept current minimum
                    return finalize(model, x, sigma, p, chi2, iterations);
                }
            }
        }
        if !improved {
            return finalize(model, x, sigma, p, chi2, iterations);
        }
    }
    Err(Error::FitDiverged(LM_MAX_ITER))
}

fn finalize<F>(
    model: F,
    x: &[f64],
    sigma: Option<&[f64]>,
    p: Vec<f64>,
    chi2: f64,
    iterations: usize,
) -> Result<FitResult>
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = x.len();
    let np = p.len();
    let w = |i: usize| sigma.map(|s| 1.0 / s[i]).unwrap_or(1.0);
    let mut jtj = vec![vec![0.0; np]; np];
    for k in 0..np {
        let h = 1e-6 * p[k].abs().max(1e-8);
        let mut pp = p.clone();
        pp[k] += h;
        let mut pm = p.clone();
        pm[k] -= h;
        let cols: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| (model(&pp, xi) - model(&pm, xi)) / (2.0 * h) * w(i))
            .collect();
        // accumulate upper triangle lazily below
        for (k2, _) in p.iter().enumerate().take(k + 1) {
            let h2 = 1e-6 * p[k2].abs().max(1e-8);
            let mut pp2 = p.clone();
            pp2[k2] += h2;
            let mut pm2 = p.clone();
            pm2[k2] -= h2;
            let dot: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| {
                    cols[i] * ((model(&pp2, xi) - model(&pm2, xi)) / (2.0 * h2) * w(i))
                })
                .sum();
            jtj[k][k2] = dot;
            jtj[k2][k] = dot;
        }
    }
    let dof = n.saturating_sub(np);
    let scale = if sigma.is_some() {
        1.0
    } else if dof > 0 {
        chi2 / dof as f64
    } else {
        0.0
    };
    let stderr = match invert_dense(&jtj) {
        Some(cov) => (0..np).map(|k| (cov[k][k].max(0.0) * scale).sqrt()).collect(),
        None => vec![f64::NAN; np],
    };
    Ok(FitResult {
        params: p,
        stderr,
        chi2,
        dof,
        iterations,
    })
}

/// y = A exp(-k t); params [A, k].
pub fn exponential_fit(t: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(t.len(), 2)?;
    // fit in normalized coordinates so the numeric Jacobian sees O(1) params
    let t_scale = (t.last().unwrap() - t[0]).abs().max(1e-300);
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let ts: Vec<f64> = t.iter().map(|v| v / t_scale).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / y_scale).collect();
    let a0 = ys.first().copied().unwrap_or(1.0).max(1e-12);
    let yl = ys.last().copied().unwrap_or(a0 * 0.1).max(a0 * 1e-6);
    let k0 = (a0 / yl).ln().max(1e-6) / (ts.last().unwrap() - ts[0]);
    let mut fit = levenberg_marquardt(|p, x| p[0] * (-p[1] * x).exp(), &ts, &ys, None, &[a0, k0])?;
    fit.params[0] *= y_scale;
    fit.stderr[0] *= y_scale;
    fit.params[1] /= t_scale;
    fit.stderr[1] /= t_scale;
    fit.chi2 *= y_scale * y_scale;
    Ok(fit)
}

/// Straight-line fit of ln y, the way decay data on a log plot is rated;
/// returns [A, k] for y = A exp(-k t). Requires strictly positive y.
pub fn log_exponential_fit(t: &[f64], y: &[f64]) -> Result<FitResult> {
    if y.iter().any(|&v| v <= 0.0) {
        return Err(Error::EmptyData("log-exponential fit needs positive data"));
    }
    let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let lin = linear_fit(t, &ln_y)?;
    Ok(FitResult {
        params: vec![lin.params[0].exp(), -lin.params[1]],
        stderr: vec![lin.params[0].exp() * lin.stderr[0], lin.stderr[1]],
        chi2: lin.chi2,
        dof: lin.dof,
        iterations: 0,
    })
}

/// y = A (exp(-k1 t) - exp(-k2 t)) with k1 < k2; params [A, k1, k2].
pub fn double_exponential_fit(t: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(t.len(), 3)?;
    let t_scale = (t.last().unwrap() - t[0]).abs().max(1e-300);
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let ts: Vec<f64> = t.iter().map(|v| v / t_scale).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / y_scale).collect();
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .ok_or(Error::EmptyData("double exponential fit"))?;
    let tpk = ts[imax].max(ts[1]);
    // rise dominates before the peak, decay after; crude but adequate seeds
    let k2 = 3.0 / tpk;
    let span = ts.last().unwrap() - tpk;
    let k1 = (1.0 / span.max(tpk)).max(1e-9);
    let a0 = ymax;
    let mut fit = levenberg_marquardt(
        |p, x| p[0] * ((-p[1] * x).exp() - (-p[2] * x).exp()),
        &ts,
        &ys,
        None,
        &[a0, k1, k2],
    )?;
    fit.params[0] *= y_scale;
    fit.stderr[0] *= y_scale;
    for k in 1..3 {
        fit.params[k] /= t_scale;
        fit.stderr[k] /= t_scale;
    }
    fit.chi2 *= y_scale * y_scale;
    if fit.params[1] > fit.params[2] {
        // A(e^{-k1} - e^{-k2}) = -A(e^{-k2} - e^{-k1}): normalize ordering
        fit.params.swap(1, 2);
        fit.stderr.swap(1, 2);
        fit.params[0] = -fit.params[0];
    }
    Ok(fit)
}

/// y = ofs + A w^2 / (w^2 + 4 (x - x0)^2); params [A, x0, w, ofs]
/// with w the full width at half maximum.
pub fn lorentzian_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_points(x.len(), 4)?;
    let x_mid = (x[0] + x.last().unwrap()) / 2.0;
    let x_scale = ((x.last().unwrap() - x[0]).abs() / 2.0).max(1e-300);
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let xs: Vec<f64> = x.iter().map(|v| (v - x_mid) / x_scale).collect();
    let ys: Vec<f64> = y.iter().map(|v| v / y_scale).collect();
    let ofs0 = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .ok_or(Error::EmptyData("lorentzian fit"))?;
    let a0 = (ymax - ofs0).max(1e-12);
    let x00 = xs[imax];
    // half-max crossing estimate for the width seed
    let half = ofs0 + a0 / 2.0;
    let mut w0 = (xs.last().unwrap() - xs[0]).abs() / 4.0;
    for i in imax..xs.len() {
        if ys[i] < half {
            w0 = 2.0 * (xs[i] - x00).abs();
            break;
        }
    }
    let mut fit = levenberg_marquardt(
        |p, xv| {
            let w2 = p[2] * p[2];
            p[3] + p[0] * w2 / (w2 + 4.0 * (xv - p[1]) * (xv - p[1]))
        },
        &xs,
        &ys,
        None,
        &[a0, x00, w0.max(1e-9), ofs0],
    )?;
    fit.params[0] *= y_scale;
    fit.stderr[0] *= y_scale;
    fit.params[1] = fit.params[1] * x_scale + x_mid;
    fit.stderr[1] *= x_scale;
    fit.params[2] = fit.params[2].abs() * x_scale;
    fit.stderr[2] *= x_scale;
    fit.params[3] *= y_scale;
    fit.stderr[3] *= y_scale;
    fit.chi2 *= y_scale * y_scale;
    Ok(fit)
}

/// Radially symmetric 2D Gaussian A exp(-((x-x0)^2 + (y-y0)^2)/(2 s^2)) fit
/// to (x, y, z) samples; params [A, x0, y0, s].
pub fn gauss2d_fit(points: &[(f64, f64, f64)]) -> Result<FitResult> {
    check_points(points.len(), 4)?;
    let total: f64 = points.iter().map(|p| p.2.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::EmptyData("gauss2d fit: all-zero field"));
    }
    let x0 = points.iter().map(|p| p.0 * p.2.max(0.0)).sum::<f64>() / total;
    let y0 = points.iter().map(|p| p.1 * p.2.max(0.0)).sum::<f64>() / total;
    let var = points
        .iter()
        .map(|p| ((p.0 - x0).powi(2) + (p.1 - y0).powi(2)) * p.2.max(0.0))
        .sum::<f64>()
        / total
        / 2.0;
    let a0 = points
        .iter()
        .map(|p| p.2)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1e-12);

    // flatten to 1D by index; the model looks points up by position
    let idx: Vec<f64> = (0..points.len()).map(|i| i as f64).collect();
    let z: Vec<f64> = points.iter().map(|p| p.2).collect();
    let pts = points.to_vec();
    levenberg_marquardt(
        move |p, i| {
            let (x, y, _) = pts[i as usize];
            let d2 = (x - p[1]).powi(2) + (y - p[2]).powi(2);
            p[0] * (-d2 / (2.0 * p[3] * p[3])).exp()
        },
        &idx,
        &z,
        None,
        &[a0, x0, y0, var.sqrt().max(1e-6)],
    )
    .map(|mut fit| {
        fit.params[3] = fit.params[3].abs();
        fit
    })
}
