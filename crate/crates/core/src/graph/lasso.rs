//! Non-negative Lasso by cyclic coordinate descent.
//!
//! Minimises `||y - X b||^2 + tau * sum(b)` over `b >= 0`. The data term is
//! an unscaled sum of squares and there is no intercept or standardisation.
//! Coordinate updates work on the Gram matrix `G = X'X` and `c = X'y`:
//!
//! ```text
//! b_k <- max(0, (c_k - sum_{j != k} G_kj b_j - tau / 2) / G_kk)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the KKT conditions of a returned solution.
pub const KKT_TOL: f64 = 1e-6;
const STEP_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

/// Regression of one target column on candidate columns, all of length
/// `n_samples * n_constrained` (sample-major).
#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    pub targets: Vec<f64>,
    pub features: Vec<Vec<f64>>,
}

impl LassoProblem {
    fn check(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::NoFeatures);
        }
        if let Some(f) = self.features.iter().find(|f| f.len() != self.targets.len()) {
            return Err(Error::DimensionMismatch(format!(
                "feature of length {} for {} targets",
                f.len(),
                self.targets.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    /// Feature positions with a strictly positive coefficient.
    pub active_set: Vec<usize>,
    pub sweeps: usize,
    /// Largest KKT violation at the returned point.
    pub kkt_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective evaluated directly from the residual.
pub fn lasso_objective(problem: &LassoProblem, beta: &[f64], tau: f64) -> f64 {
    let mut residual = problem.targets.clone();
    for (f, &b) in problem.features.iter().zip(beta) {
        if b != 0.0 {
            residual.iter_mut().zip(f).for_each(|(r, x)| *r -= b * x);
        }
    }
    dot(&residual, &residual) + tau * beta.iter().sum::<f64>()
}

/// Gradient of the objective, `-2 X'(y - X b) + tau`.
pub fn lasso_gradient(problem: &LassoProblem, beta: &[f64], tau: f64) -> Vec<f64> {
    let mut residual = problem.targets.clone();
    for (f, &b) in problem.features.iter().zip(beta) {
        residual.iter_mut().zip(f).for_each(|(r, x)| *r -= b * x);
    }
    problem
        .features
        .iter()
        .map(|f| -2.0 * dot(f, &residual) + tau)
        .collect()
}

fn kkt_violation(grad: &[f64], beta: &[f64]) -> f64 {
    grad.iter()
        .zip(beta)
        .map(|(&g, &b)| if b > 0.0 { g.abs() } else { (-g).max(0.0) })
        .fold(0.0, f64::max)
}

pub fn nonneg_lasso(problem: &LassoProblem, tau: f64) -> Result<LassoSolution> {
    problem.check()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::BadConfig(format!("lasso penalty {tau} must be positive")));
    }
    let p = problem.features.len();
    let gram: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| dot(&problem.features[i], &problem.features[j])).collect())
        .collect();
    let corr: Vec<f64> = problem.features.iter().map(|f| dot(f, &problem.targets)).collect();
    let half_tau = tau / 2.0;

    let mut beta = vec![0.0; p];
    // gram * beta, maintained incrementally
    let mut fitted = vec![0.0; p];
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_step: f64 = 0.0;
        for k in 0..p {
            if gram[k][k] <= 0.0 {
                continue;
            }
            let partial = corr[k] - (fitted[k] - gram[k][k] * beta[k]);
            let updated = ((partial - half_tau) / gram[k][k]).max(0.0);
            let step = updated - beta[k];
            if step != 0.0 {
                for (f, g) in fitted.iter_mut().zip(&gram[k]) {
                    *f += g * step;
                }
                beta[k] = updated;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < STEP_TOL {
            let grad: Vec<f64> = (0..p).map(|k| 2.0 * (fitted[k] - corr[k]) + tau).collect();
            if kkt_violation(&grad, &beta) < KKT_TOL {
                break;
            }
            // refresh the running product against accumulated drift
            for (k, f) in fitted.iter_mut().enumerate() {
                *f = dot(&gram[k], &beta);
            }
        }
    }
    let kkt = kkt_violation(&lasso_gradient(problem, &beta, tau), &beta);
    if kkt >= KKT_TOL {
        log::warn!("non-negative lasso stopped after {sweeps} sweeps with KKT residual {kkt:e}");
    }
    Ok(LassoSolution {
        objective: lasso_objective(problem, &beta, tau),
        active_set: (0..p).filter(|&k| beta[k] > 0.0).collect(),
        beta,
        sweeps,
        kkt_residual: kkt,
    })
}
