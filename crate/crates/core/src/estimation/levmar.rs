//! Box-constrained Levenberg–Marquardt with a finite-difference Jacobian.
//!
//! Works in whatever coordinates the caller hands it; the fit uses unit
//! box coordinates so that one step tolerance fits every parameter.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged once an accepted step is shorter than this (max norm).
    pub step_tolerance: f64,
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 1000,
            step_tolerance: 1e-9,
            fd_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
/// Sum of squares treated as an exact fit.
const ZERO_COST: f64 = 1e-30;

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian, one-sided where a bound is in the way.
/// Returns `None` if the model cannot be evaluated around `x`.
pub fn jacobian<F>(f: &F, x: &[f64], lower: &[f64], upper: &[f64], h: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = f(x)?.len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let hi = (x[j] + h).min(upper[j]);
        let lo = (x[j] - h).max(lower[j]);
        if hi <= lo {
            continue;
        }
        probe[j] = hi;
        let fp = f(&probe)?;
        probe[j] = lo;
        let fm = f(&probe)?;
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (hi - lo);
        }
    }
    Some(jac)
}

/// Minimizes `Σ r(x)²` over the box `[lower, upper]` starting from `x0`.
/// `residuals` returns `None` for parameter values where the model is
/// undefined; such trial points are rejected like uphill steps.
pub fn minimize<F>(residuals: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LmOptions) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x: Vec<f64> = (0..n).map(|j| x0[j].clamp(lower[j], upper[j])).collect();
    let mut r = residuals(&x)?;
    let mut cost = sum_sq(&r);
    let mut lambda = LAMBDA_START;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if cost <= ZERO_COST {
            converged = true;
            break;
        }
        iterations += 1;
        let Some(jac) = jacobian(&residuals, &x, lower, upper, opts.fd_step) else {
            break;
        };
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        if grad.amax() == 0.0 {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 4.0;
                continue;
            };
            let trial: Vec<f64> = (0..n)
                .map(|j| (x[j] + delta[j]).clamp(lower[j], upper[j]))
                .collect();
            let step = (0..n).map(|j| (trial[j] - x[j]).abs()).fold(0.0, f64::max);
            match residuals(&trial) {
                Some(rt) if sum_sq(&rt) < cost => {
                    x = trial;
                    cost = sum_sq(&rt);
                    r = rt;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if step < opts.step_tolerance {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    if step < opts.step_tolerance * 1e-3 {
                        // no representable descent step remains
                        lambda = LAMBDA_MAX * 2.0;
                        break;
                    }
                    lambda *= 4.0;
                }
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // stationary to working precision
            converged = true;
            break;
        }
    }

    Some(LmOutcome {
        x,
        residuals: r,
        cost,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential_decay() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let data: Vec<f64> = t.iter().map(|t| 2.5 * (-0.7 * t).exp()).collect();
        let f = |p: &[f64]| Some(t.iter().zip(&data).map(|(t, y)| p[0] * (-p[1] * t).exp() - y).collect());
        let out = minimize(f, &[1.0, 0.1], &[0.0, 0.0], &[10.0, 5.0], &LmOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 2.5).abs() < 1e-8);
        assert!((out.x[1] - 0.7).abs() < 1e-8);
    }

    #[test]
    fn respects_bounds() {
        let f = |p: &[f64]| Some(vec![p[0] - 3.0]);
        let out = minimize(f, &[0.5], &[0.0], &[1.0], &LmOptions::default()).unwrap();
        assert_eq!(out.x[0], 1.0);
        assert!(out.converged);
    }

    #[test]
    fn flat_model_converges_immediately() {
        let f = |_: &[f64]| Some(vec![1.0, -1.0]);
        let out = minimize(f, &[0.5, 0.5], &[0.0; 2], &[1.0; 2], &LmOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.x, vec![0.5, 0.5]);
    }

    #[test]
    fn reports_non_convergence() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let f = |p: &[f64]| Some(t.iter().map(|t| p[0] * (-p[1] * t).exp() - 1.0 - t).collect());
        let opts = LmOptions {
            max_iterations: 1,
            ..Default::default()
        };
        let out = minimize(f, &[1.0, 1.0], &[-10.0, -10.0], &[10.0, 10.0], &opts).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }
}
