//! Levenberg–Marquardt for small weighted least-squares problems.

use nalgebra::{DMatrix, DVector};

pub const MAX_ITERATIONS: usize = 200;
pub const COST_TOLERANCE: f64 = 1e-10;
/// Damping beyond which no step can lower the cost any more.
const LAMBDA_CEILING: f64 = 1e14;

pub trait Model {
    fn n_params(&self) -> usize;
    fn eval(&self, x: f64, p: &[f64]) -> f64;
    /// ∂f/∂p at `x`, written to `out`.
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub params: Vec<f64>,
    /// Square roots of the diagonal of (JᵀWJ)⁻¹ at the optimum.
    pub errors: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub struct Data<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub err: &'a [f64],
}

fn chi2<M: Model>(model: &M, data: &Data, p: &[f64]) -> f64 {
    data.x
        .iter()
        .zip(data.y)
        .zip(data.err)
        .map(|((&x, &y), &e)| ((y - model.eval(x, p)) / e).powi(2))
        .sum()
}

/// Normal matrix JᵀWJ and gradient JᵀW r.
fn normal_equations<M: Model>(model: &M, data: &Data, p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = model.n_params();
    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    let mut grad = vec![0.0; n];
    for ((&x, &y), &e) in data.x.iter().zip(data.y).zip(data.err) {
        model.gradient(x, p, &mut grad);
        let w = 1.0 / (e * e);
        let r = y - model.eval(x, p);
        for i in 0..n {
            g[i] += w * grad[i] * r;
            for j in 0..=i {
                h[(i, j)] += w * grad[i] * grad[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(j, i)] = h[(i, j)];
        }
    }
    (h, g)
}

fn parameter_errors(h: &DMatrix<f64>) -> Vec<f64> {
    let n = h.nrows();
    match h.clone().try_inverse() {
        Some(cov) if (0..n).all(|i| cov[(i, i)] >= 0.0) => (0..n).map(|i| cov[(i, i)].sqrt()).collect(),
        // singular curvature: fall back to the conditional errors
        _ => (0..n).map(|i| 1.0 / h[(i, i)].sqrt()).collect(),
    }
}

pub fn minimize<M: Model>(model: &M, data: &Data, start: &[f64]) -> Outcome {
    let mut p = start.to_vec();
    let mut cost = chi2(model, data, &p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let (h, g) = normal_equations(model, data, &p);
        let scale = (0..h.nrows()).map(|i| h[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda <= LAMBDA_CEILING {
            let mut damped = h.clone();
            for i in 0..h.nrows() {
                damped[(i, i)] += lambda * h[(i, i)].max(1e-12 * scale);
            }
            let step = damped.cholesky().map(|c| c.solve(&g));
            if let Some(step) = step {
                let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let trial_cost = chi2(model, data, &trial);
                if trial_cost.is_finite() && trial_cost <= cost {
                    let relative = (cost - trial_cost) / cost;
                    p = trial;
                    cost = trial_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if relative < COST_TOLERANCE {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no damped step lowers the cost: the current point is a minimum
            converged = true;
        }
        if converged {
            break;
        }
    }

    let (h, _) = normal_equations(model, data, &p);
    Outcome {
        errors: parameter_errors(&h),
        params: p,
        chi2: cost,
        iterations,
        converged,
    }
}
