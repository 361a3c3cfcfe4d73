//! Pairwise counts and Bradley-Terry fitting by minorization-maximization.

use serde::{Deserialize, Serialize};

use super::prior::PriorSpec;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Score given to items that take part in no comparison.
pub const SCORE_FLOOR: f64 = 1e-12;
/// Keeps iterates positive and their logarithms finite.
const GUARD: f64 = f64::MIN_POSITIVE;

/// `p_i / (p_i + p_j)`, or 1/2 when both are zero.
pub fn data_prob(p_i: f64, p_j: f64) -> f64 {
    let total = p_i + p_j;
    if total == 0.0 {
        0.5
    } else {
        p_i / total
    }
}

/// Non-negative comparison counts with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseCounts {
    w: Vec<Vec<f64>>,
}

impl PairwiseCounts {
    pub fn from_matrix(mut w: Vec<Vec<f64>>) -> Result<Self> {
        let n = w.len();
        for (i, row) in w.iter_mut().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "count row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::DimensionMismatch(format!(
                    "count {bad} in row {i} is not a finite non-negative number"
                )));
            }
            row[i] = 0.0;
        }
        Ok(Self { w })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.w
    }
}

/// `w_ij = n_opt * data_prob(p_i, p_j) + n_p * eta_ij` off the diagonal.
pub fn pairwise_counts(pvalues: &[f64], prior: &PriorSpec, n_opt: usize) -> Result<PairwiseCounts> {
    let n = pvalues.len();
    if prior.len() != n {
        return Err(Error::PriorShapeMismatch {
            expected: n,
            found: prior.len(),
        });
    }
    let n_opt = n_opt as f64;
    let n_p = prior.pseudocount();
    let w = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        n_opt * data_prob(pvalues[i], pvalues[j]) + n_p * prior.eta(i, j)
                    }
                })
                .collect()
        })
        .collect();
    Ok(PairwiseCounts { w })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtScores {
    /// Positive scores summing to one.
    pub scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Items that appear in no comparison and were pinned to the floor.
    pub degenerate: Vec<usize>,
}

/// `sum_{i != j} w_ij ln(s_i / (s_i + s_j))`.
pub fn bt_log_likelihood(counts: &PairwiseCounts, scores: &[f64]) -> f64 {
    let n = counts.len();
    let mut ll = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = counts.w[i][j];
            if i != j && w > 0.0 {
                ll += w * (scores[i] / (scores[i] + scores[j])).ln();
            }
        }
    }
    ll
}

/// Fits Bradley-Terry scores with Hunter's MM update
/// `s_i <- W_i / sum_j (w_ij + w_ji) / (s_i + s_j)`, renormalising to sum one
/// after every sweep and stopping once the largest relative change of a sweep
/// is below `tol`. Hitting `max_iter` sweeps returns the last
/// iterate with `converged = false`.
///
/// Plain MM crawls when a group of scores heads for the floor, so every sweep
/// is followed by a Newton proposal in log scores. A proposal is kept only if
/// one MM sweep from it does not lower the likelihood, and convergence is
/// always measured on an MM sweep, so the fixed points are those of MM.
pub fn fit_bt_mm(counts: &PairwiseCounts, tol: f64, max_iter: usize) -> BtScores {
    fit_bt_mm_observed(counts, tol, max_iter, |_| {})
}

struct Mm<'a> {
    counts: &'a PairwiseCounts,
    wins: Vec<f64>,
    games: Vec<Vec<f64>>,
}

impl Mm<'_> {
    fn sweep(&self, s: &[f64]) -> Vec<f64> {
        let n = s.len();
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| self.games[i][j] > 0.0)
                    .map(|j| self.games[i][j] / (s[i] + s[j]))
                    .sum();
                let raw = if denom > 0.0 { self.wins[i] / denom } else { 0.0 };
                raw.max(GUARD)
            })
            .collect();
        normalise(&mut next);
        next
    }

    fn ll(&self, s: &[f64]) -> f64 {
        bt_log_likelihood(self.counts, s)
    }

    /// Newton step on `theta = ln s` with the largest score held fixed,
    /// halved until the likelihood improves.
    fn newton(&self, s: &[f64]) -> Option<Vec<f64>> {
        let n = s.len();
        let pin = (0..n).max_by(|&a, &b| s[a].total_cmp(&s[b]))?;
        let free: Vec<usize> = (0..n)
            .filter(|&i| i != pin && self.games[i].iter().any(|&g| g > 0.0))
            .collect();
        let m = free.len();
        // negative Hessian and gradient of the log-likelihood
        let mut h = vec![vec![0.0; m + 1]; m];
        for (a, &i) in free.iter().enumerate() {
            let mut diag = 0.0;
            let mut grad = self.wins[i];
            for j in 0..n {
                let g = self.games[i][j];
                if g == 0.0 {
                    continue;
                }
                let t = s[i] / (s[i] + s[j]);
                grad -= g * t;
                let c = g * t * (1.0 - t);
                diag += c;
                if let Some(b) = free.iter().position(|&k| k == j) {
                    h[a][b] -= c;
                }
            }
            h[a][a] += diag;
            h[a][m] = grad;
        }
        let step = solve(h)?;
        let base = self.ll(s);
        let mut scale = 1.0;
        for _ in 0..30 {
            let mut y = s.to_vec();
            for (a, &i) in free.iter().enumerate() {
                y[i] = (s[i].ln() + scale * step[a]).exp().max(GUARD);
            }
            normalise(&mut y);
            if y.iter().all(|v| v.is_finite()) && self.ll(&y) >= base {
                return Some(y);
            }
            scale *= 0.5;
        }
        None
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if !(a[piv][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=m {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let tail: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][m] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn normalise(s: &mut [f64]) {
    let total: f64 = s.iter().sum();
    s.iter_mut().for_each(|x| *x /= total);
}

fn rel_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(o, n)| ((n - o) / o).abs())
        .fold(0.0, f64::max)
}

/// Same as [`fit_bt_mm`], calling `observe` with the normalised iterate
/// after initialisation and after every accepted step.
pub fn fit_bt_mm_observed(
    counts: &PairwiseCounts,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64]),
) -> BtScores {
    let n = counts.len();
    let w = &counts.w;
    let wins: Vec<f64> = (0..n).map(|i| w[i].iter().sum()).collect();
    let games: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { w[i][j] + w[j][i] }).collect())
        .collect();
    let degenerate: Vec<usize> = (0..n)
        .filter(|&i| games[i].iter().all(|&g| g == 0.0))
        .collect();
    let mm = Mm { counts, wins, games };

    // Start from win fractions: close to the fixed point when scores span
    // many orders of magnitude, where a flat start crawls.
    let mut s: Vec<f64> = (0..n)
        .map(|i| {
            let g: f64 = mm.games[i].iter().sum();
            if g > 0.0 { (mm.wins[i] / g).max(GUARD) } else { SCORE_FLOOR }
        })
        .collect();
    if n > 0 {
        normalise(&mut s);
    }
    observe(&s);
    let mut converged = n <= 1;
    let mut iterations = 0;
    while !converged && iterations < max_iter {
        let s1 = mm.sweep(&s);
        iterations += 1;
        converged = rel_change(&s, &s1) < tol;
        if converged || iterations == max_iter {
            s = s1;
            observe(&s);
            continue;
        }
        let mut next = s1;
        if let Some(y) = mm.newton(&next) {
            let y1 = mm.sweep(&y);
            iterations += 1;
            if mm.ll(&y1) >= mm.ll(&next) {
                converged = rel_change(&y, &y1) < tol;
                next = y1;
            }
        }
        s = next;
        observe(&s);
    }
    if !converged {
        log::debug!("Bradley-Terry MM stopped after {iterations} sweeps without converging");
    }
    if !degenerate.is_empty() {
        degenerate.iter().for_each(|&i| s[i] = SCORE_FLOOR);
        normalise(&mut s);
    }
    BtScores {
        scores: s,
        converged,
        iterations,
        degenerate,
    }
}
