use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::HyperparamId;

const ANTISYMMETRY_TOL: f64 = 1e-9;

/// Pairwise prior probabilities `eta[i][j]` with a pseudocount weight.
///
/// Entries follow the data-driven probability's orientation: `eta[i][j]` is
/// small when `i` is expected to have the smaller p-value. Use
/// [`PriorSpec::flipped`] for priors elicited as "1 = i more reliable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    eta: Vec<Vec<f64>>,
    pseudocount: f64,
}

impl PriorSpec {
    pub fn new(eta: Vec<Vec<f64>>, pseudocount: f64) -> Result<Self> {
        if !(pseudocount.is_finite() && pseudocount >= 0.0) {
            return Err(Error::BadPrior(format!("pseudocount {pseudocount} must be >= 0")));
        }
        let n = eta.len();
        if let Some(row) = eta.iter().position(|r| r.len() != n) {
            return Err(Error::BadPrior(format!(
                "row {row} has {} entries, expected {n}",
                eta[row].len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let e = eta[i][j];
                if !(0.0..=1.0).contains(&e) {
                    return Err(Error::BadPrior(format!("eta[{i}][{j}] = {e} outside [0, 1]")));
                }
                if (eta[j][i] - (1.0 - e)).abs() > ANTISYMMETRY_TOL {
                    return Err(Error::BadPrior(format!(
                        "eta[{j}][{i}] = {} but 1 - eta[{i}][{j}] = {}",
                        eta[j][i],
                        1.0 - e
                    )));
                }
            }
        }
        Ok(Self { eta, pseudocount })
    }

    /// No prior information: all entries 1/2, pseudocount 0.
    pub fn uninformative(n: usize) -> Self {
        Self {
            eta: vec![vec![0.5; n]; n],
            pseudocount: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn pseudocount(&self) -> f64 {
        self.pseudocount
    }

    pub fn with_pseudocount(mut self, pseudocount: f64) -> Result<Self> {
        if !(pseudocount.is_finite() && pseudocount >= 0.0) {
            return Err(Error::BadPrior(format!("pseudocount {pseudocount} must be >= 0")));
        }
        self.pseudocount = pseudocount;
        Ok(self)
    }

    pub fn eta(&self, i: usize, j: usize) -> f64 {
        self.eta[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.eta
    }

    /// Converts between the two orientation conventions (`eta_ij -> eta_ji`).
    pub fn flipped(&self) -> Self {
        let n = self.len();
        let eta = (0..n)
            .map(|i| (0..n).map(|j| self.eta[j][i]).collect())
            .collect();
        Self {
            eta,
            pseudocount: self.pseudocount,
        }
    }

    /// Sub-matrix over `members`, which index into this prior.
    pub fn restrict(&self, members: &[HyperparamId]) -> Result<Self> {
        if let Some(bad) = members.iter().find(|h| h.0 >= self.len()) {
            return Err(Error::PriorShapeMismatch {
                expected: bad.0 + 1,
                found: self.len(),
            });
        }
        let eta = members
            .iter()
            .map(|a| members.iter().map(|b| self.eta[a.0][b.0]).collect())
            .collect();
        Ok(Self {
            eta,
            pseudocount: self.pseudocount,
        })
    }

    /// Swaps `eta_ij` and `eta_ji` for the unordered pairs selected by `swap`.
    pub(crate) fn swap_pairs(&self, mut swap: impl FnMut(usize, usize) -> bool) -> Self {
        let mut eta = self.eta.clone();
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                if swap(i, j) {
                    let t = eta[i][j];
                    eta[i][j] = eta[j][i];
                    eta[j][i] = t;
                }
            }
        }
        Self {
            eta,
            pseudocount: self.pseudocount,
        }
    }
}
