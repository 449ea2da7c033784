//! L2-regularized logistic regression by full-batch gradient descent.
//!
//! Objective: `mean(softplus(z) - y z) + (lambda / 2) |w|^2` with an
//! unpenalized intercept. Each iteration moves along the diagonally
//! preconditioned negative gradient, tries a Barzilai-Borwein step length and
//! backtracks until the Armijo condition holds, so accepted steps never
//! increase the objective.

use serde::{Deserialize, Serialize};

use super::{logistic_loss, sigmoid, ModelError};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub l2_lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LogRegModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.score_row(row))
    }
}

/// Objective value and gradient; the gradient's last entry is the intercept's.
pub fn objective_and_gradient(x: &Matrix, y: &[f64], lambda: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let d = x.cols();
    let n = x.rows() as f64;
    let (w, b) = (&params[..d], params[d]);
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for i in 0..x.rows() {
        let row = x.row(i);
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        loss += logistic_loss(y[i], z);
        let g = sigmoid(z) - y[i];
        for (gj, xj) in grad[..d].iter_mut().zip(row) {
            *gj += g * xj;
        }
        grad[d] += g;
    }
    for g in &mut grad {
        *g /= n;
    }
    let penalty: f64 = w.iter().map(|v| v * v).sum();
    for (gj, wj) in grad[..d].iter_mut().zip(w) {
        *gj += lambda * wj;
    }
    (loss / n + 0.5 * lambda * penalty, grad)
}

fn objective(x: &Matrix, y: &[f64], lambda: f64, params: &[f64]) -> f64 {
    let d = x.cols();
    let (w, b) = (&params[..d], params[d]);
    let loss: f64 = (0..x.rows())
        .map(|i| logistic_loss(y[i], b + x.row(i).iter().zip(w).map(|(a, c)| a * c).sum::<f64>()))
        .sum();
    loss / x.rows() as f64 + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

pub fn train_logreg(x: &Matrix, y: &[bool], params: &LogRegParams) -> Result<LogRegModel, ModelError> {
    let d = x.cols();
    let n = x.rows() as f64;
    let targets: Vec<f64> = y.iter().map(|&b| b as u8 as f64).collect();
    let lambda = params.l2_lambda;
    // Diagonal preconditioner from per-coordinate curvature bounds; keeps the
    // intercept and heavily penalized weights on comparable step scales.
    let mut precond: Vec<f64> = (0..d)
        .map(|j| {
            let ms = (0..x.rows()).map(|i| x.get(i, j).powi(2)).sum::<f64>() / n;
            1.0 / (lambda + 0.25 * ms + 1e-12)
        })
        .collect();
    precond.push(4.0);

    let mut theta = vec![0.0; d + 1];
    let (mut f, mut g) = objective_and_gradient(x, &targets, lambda, &theta);
    if !f.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        let gnorm_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm_inf < params.tol {
            converged = true;
            break;
        }
        if let Some((pt, pg)) = &prev {
            // Barzilai-Borwein step in the preconditioned metric.
            let mut sds = 0.0;
            let mut sy = 0.0;
            for j in 0..=d {
                let s = theta[j] - pt[j];
                sds += s * s / precond[j];
                sy += s * (g[j] - pg[j]);
            }
            if sy > 0.0 {
                step = (sds / sy).clamp(1e-10, 1e10);
            }
        }
        let dir: Vec<f64> = g.iter().zip(&precond).map(|(gi, p)| -gi * p).collect();
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, di)| t + step * di).collect();
            let fc = objective(x, &targets, lambda, &cand);
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            // No decrease representable in floating point: treat as converged.
            converged = true;
            break;
        };
        assert!(fc <= f, "accepted step increased the objective");
        let (_, gc) = objective_and_gradient(x, &targets, lambda, &cand);
        prev = Some((std::mem::replace(&mut theta, cand), std::mem::replace(&mut g, gc)));
        f = fc;
        iterations += 1;
    }
    if !f.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    Ok(LogRegModel { weights: theta[..d].to_vec(), intercept: theta[d], converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64) -> LogRegParams {
        LogRegParams { l2_lambda: lambda, max_iter: 5000, tol: 1e-10 }
    }

    #[test]
    fn symmetric_pair() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![1.0]]);
        let m = train_logreg(&x, &[false, true], &params(0.1)).unwrap();
        assert!(m.converged);
        assert!(m.intercept.abs() < 1e-6);
        assert!((m.predict_row(&[-1.0]) + m.predict_row(&[1.0]) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn heavy_penalty_gives_prevalence() {
        let x = Matrix::from_rows(&[vec![-1.0, 2.0], vec![0.5, 1.0], vec![1.0, -1.0], vec![2.0, 0.0]]);
        let y = [false, true, true, true];
        let m = train_logreg(&x, &y, &params(1e8)).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
        assert!((m.predict_row(&[3.0, 3.0]) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn label_flip_negates_score() {
        let x = Matrix::from_rows(&[vec![0.3, -1.0], vec![1.2, 0.4], vec![-0.7, 0.9], vec![2.0, 1.5], vec![-1.1, -0.2]]);
        let y = [true, false, true, true, false];
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let a = train_logreg(&x, &y, &params(0.05)).unwrap();
        let b = train_logreg(&x, &flipped, &params(0.05)).unwrap();
        for i in 0..x.rows() {
            assert!((a.predict_row(x.row(i)) + b.predict_row(x.row(i)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let m = train_logreg(&x, &[false, true, false], &LogRegParams { l2_lambda: 0.0, max_iter: 1, tol: 1e-14 }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 1);
    }
}
