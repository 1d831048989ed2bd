//! Quasi-Newton minimization with a Newton polish.
//!
//! BFGS on the inverse Hessian with Armijo backtracking. If the gradient
//! test has not passed when BFGS stops, Newton steps on a finite-difference
//! Hessian of the analytic gradient finish the job.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Central-difference Hessian of an analytic gradient, symmetrized.
pub(crate) fn fd_hessian(f: &dyn Fn(&[f64], &mut [f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let k = x.len();
    let mut h = DMatrix::zeros(k, k);
    let mut xp = x.to_vec();
    let (mut gp, mut gm) = (vec![0.0; k], vec![0.0; k]);
    for j in 0..k {
        let step = 1e-5 * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        f(&xp, &mut gp);
        xp[j] = x[j] - step;
        f(&xp, &mut gm);
        xp[j] = x[j];
        for i in 0..k {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Gradient level at which BFGS hands over to Newton steps.
const POLISH_FROM: f64 = 1e-4;

/// Minimizes `f`, which returns the objective and writes its gradient.
/// Converged means the gradient max-norm fell below `tol`.
pub fn minimize(f: &dyn Fn(&[f64], &mut [f64]) -> f64, x0: &[f64], tol: f64, max_iter: usize) -> OptimResult {
    let k = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; k];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return OptimResult {
            x,
            value: fx,
            grad_norm: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
    }
    let mut hinv = DMatrix::<f64>::identity(k, k);
    let mut first = true;
    let mut iterations = 0;
    let mut stalled = 0;
    let mut x_new = vec![0.0; k];
    let mut g_new = vec![0.0; k];
    while iterations < max_iter && max_abs(&g) >= tol.max(POLISH_FROM) && stalled < 3 {
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut d = -(&hinv * &gv);
        let mut slope = d.dot(&gv);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(k, k);
            d = -gv.clone();
            slope = d.dot(&gv);
        }
        // keep the first trial step modest
        let dmax = max_abs(d.as_slice());
        let mut t = if dmax > 10.0 { 10.0 / dmax } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..k {
                x_new[j] = x[j] + t * d[j];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * t * slope {
                let s = DVector::from_iterator(k, (0..k).map(|j| x_new[j] - x[j]));
                let yv = DVector::from_iterator(k, (0..k).map(|j| g_new[j] - g[j]));
                let sy = s.dot(&yv);
                if sy > 1e-12 * s.norm() * yv.norm() {
                    if first {
                        hinv = DMatrix::identity(k, k) * (sy / yv.dot(&yv));
                        first = false;
                    }
                    let rho = 1.0 / sy;
                    let hy = &hinv * &yv;
                    let yhy = yv.dot(&hy);
                    hinv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                        - (&hy * s.transpose() + &s * hy.transpose()) * rho;
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                if fx - f_new <= 1e-14 * fx.abs() {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                fx = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if first {
                break;
            }
            // stale curvature; retry once from steepest descent
            hinv = DMatrix::identity(k, k);
            first = true;
        }
    }
    if max_abs(&g) >= tol {
        newton_polish(f, &mut x, &mut fx, &mut g, tol, &mut iterations);
    }
    let grad_norm = max_abs(&g);
    OptimResult {
        x,
        value: fx,
        grad_norm,
        iterations,
        converged: grad_norm < tol && fx.is_finite(),
    }
}

fn newton_polish(
    f: &dyn Fn(&[f64], &mut [f64]) -> f64,
    x: &mut [f64],
    fx: &mut f64,
    g: &mut [f64],
    tol: f64,
    iterations: &mut usize,
) {
    let k = x.len();
    let mut x_new = vec![0.0; k];
    let mut g_new = vec![0.0; k];
    for _ in 0..25 {
        if max_abs(g) < tol {
            return;
        }
        *iterations += 1;
        let h = fd_hessian(f, x);
        let gv = DVector::from_column_slice(g);
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&gv),
            None => {
                // shift to positive definite
                let eig = h.clone().symmetric_eigen();
                let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                let shifted = &h + DMatrix::identity(k, k) * (1e-6 - min).max(1e-6);
                match shifted.cholesky() {
                    Some(c) => c.solve(&gv),
                    None => return,
                }
            }
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            for j in 0..k {
                x_new[j] = x[j] - t * step[j];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && (f_new < *fx || (f_new <= *fx + 1e-12 * fx.abs() && max_abs(&g_new) < max_abs(g))) {
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                *fx = f_new;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            return;
        }
    }
}
