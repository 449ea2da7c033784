//! Soft-margin RBF support vector machine.
//!
//! The dual is solved by SMO with second-order working-set selection; the
//! solver stops once the maximal KKT violation drops below `tol`. Class
//! probabilities come from a Platt sigmoid fitted to the training decision
//! values with smoothed targets.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::Matrix;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub support_vectors: Matrix,
    /// `alpha_i * y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    /// Dual objective `sum(alpha) - alpha' Q alpha / 2` at the solution.
    pub dual_objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl SvmModel {
    pub fn decision_row(&self, row: &[f64]) -> f64 {
        let s: f64 = (0..self.support_vectors.rows())
            .map(|i| self.coefficients[i] * rbf(self.support_vectors.row(i), row, self.gamma))
            .sum();
        s - self.rho
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        platt_probability(self.decision_row(row), self.platt_a, self.platt_b)
    }
}

pub fn platt_probability(decision: f64, a: f64, b: f64) -> f64 {
    let f = decision * a + b;
    if f >= 0.0 {
        (-f).exp() / (1.0 + (-f).exp())
    } else {
        1.0 / (1.0 + f.exp())
    }
}

/// Solution of the C-SVC dual for labels in {-1, +1}.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Value of `sum(alpha) - alpha' Q alpha / 2` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(kernel: &Matrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel.get(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

pub fn kernel_matrix(x: &Matrix, gamma: f64) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), gamma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

/// SMO for the C-SVC dual given a precomputed kernel.
pub fn solve_dual(kernel: &Matrix, y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel.get(i, j);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // Maximal violating pair with second-order choice of the partner.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..n {
            let v = if y[t] > 0.0 {
                (!upper(alpha[t])).then(|| -grad[t])
            } else {
                (!lower(alpha[t])).then(|| grad[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    gmax_idx = Some(t);
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = None;
        let mut obj_diff_min = f64::INFINITY;
        if let Some(i) = gmax_idx {
            for j in 0..n {
                let (eligible, gj, sign) = if y[j] > 0.0 {
                    (!lower(alpha[j]), grad[j], -1.0)
                } else {
                    (!upper(alpha[j]), -grad[j], 1.0)
                };
                if !eligible {
                    continue;
                }
                gmax2 = gmax2.max(gj);
                let grad_diff = gmax + gj;
                if grad_diff > 0.0 {
                    let mut quad = kernel.get(i, i) + kernel.get(j, j) + sign * 2.0 * y[i] * q(i, j);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj_diff = -(grad_diff * grad_diff) / quad;
                    if obj_diff <= obj_diff_min {
                        obj_diff_min = obj_diff;
                        gmin_idx = Some(j);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (gmax_idx, gmin_idx) else {
            converged = true;
            break;
        };
        if gmax + gmax2 < tol {
            converged = true;
            break;
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kernel.get(i, i) + kernel.get(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kernel.get(i, i) + kernel.get(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (k, g) in grad.iter_mut().enumerate() {
            *g += q(i, k) * di + q(j, k) * dj;
        }
        iterations += 1;
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };
    let objective = -alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() / 2.0;
    DualSolution { alpha, rho, objective, converged, iterations }
}

/// Fits `P(y = 1 | f) = 1 / (1 + exp(a f + b))` by Newton's method with
/// backtracking on smoothed targets.
pub fn fit_platt(decisions: &[f64], y: &[bool]) -> (f64, f64) {
    let prior1 = y.iter().filter(|&&v| v).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&v| if v { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in decisions.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                ((-z).exp() / (1.0 + (-z).exp()), 1.0 / (1.0 + (-z).exp()))
            } else {
                (1.0 / (1.0 + z.exp()), z.exp() / (1.0 + z.exp()))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

pub fn train_svm(x: &Matrix, y: &[bool], params: &SvmParams) -> Result<SvmModel, ModelError> {
    let n = x.rows();
    let signs: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
    let kernel = kernel_matrix(x, params.gamma);
    let max_iter = 100_000usize.max(100 * n);
    let sol = solve_dual(&kernel, &signs, params.c, params.tol, max_iter);
    if !sol.objective.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    let support: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
    let coefficients: Vec<f64> = support.iter().map(|&i| sol.alpha[i] * signs[i]).collect();
    let decisions: Vec<f64> = (0..n)
        .map(|r| support.iter().zip(&coefficients).map(|(&i, c)| c * kernel.get(i, r)).sum::<f64>() - sol.rho)
        .collect();
    let (platt_a, platt_b) = fit_platt(&decisions, y);
    Ok(SvmModel {
        gamma: params.gamma,
        support_vectors: x.select_rows(&support),
        coefficients,
        rho: sol.rho,
        platt_a,
        platt_b,
        dual_objective: sol.objective,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}
