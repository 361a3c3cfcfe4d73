//! Risk data model, calibration splits and Hoeffding p-values.
//!
//! A [`RiskTable`] holds one loss value per `(sample, hyperparameter, risk)`
//! triple. Constrained risks come first; the remaining columns are auxiliary
//! objectives that only enter the final pick. All statistics downstream are
//! computed through a [`SubsetView`], which only ever reads the samples of
//! one side of a [`DataSplit`].

use std::fmt;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5eed_2024;
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.5;
pub const DEFAULT_DELTA: f64 = 0.1;

/// Dense index of a candidate hyperparameter configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperparamId(pub usize);

impl HyperparamId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for HyperparamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Loss values indexed by `(sample, hyperparameter, risk)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    n_samples: usize,
    n_hyperparams: usize,
    n_risks: usize,
    values: Vec<f64>,
    labels: Vec<String>,
}

impl RiskTable {
    /// `values` is laid out sample-major, then hyperparameter, then risk.
    pub fn new(
        n_samples: usize,
        n_hyperparams: usize,
        n_risks: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = n_samples
            .checked_mul(n_hyperparams)
            .and_then(|x| x.checked_mul(n_risks))
            .ok_or_else(|| Error::DimensionMismatch("table dimensions overflow".into()))?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_samples}x{n_hyperparams}x{n_risks} table",
                values.len()
            )));
        }
        let labels = (0..n_hyperparams).map(|h| format!("h{h}")).collect();
        Ok(Self {
            n_samples,
            n_hyperparams,
            n_risks,
            values,
            labels,
        })
    }

    pub fn from_fn(
        n_samples: usize,
        n_hyperparams: usize,
        n_risks: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_samples * n_hyperparams * n_risks);
        for z in 0..n_samples {
            for h in 0..n_hyperparams {
                for l in 0..n_risks {
                    values.push(f(z, h, l));
                }
            }
        }
        Self::new(n_samples, n_hyperparams, n_risks, values)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_hyperparams {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} hyperparameters",
                labels.len(),
                self.n_hyperparams
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_hyperparams(&self) -> usize {
        self.n_hyperparams
    }

    pub fn n_risks(&self) -> usize {
        self.n_risks
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: HyperparamId) -> &str {
        &self.labels[id.0]
    }

    pub fn hyperparams(&self) -> impl Iterator<Item = HyperparamId> {
        (0..self.n_hyperparams).map(HyperparamId)
    }

    #[inline]
    pub fn get(&self, sample: usize, hyperparam: HyperparamId, risk: usize) -> f64 {
        self.values[(sample * self.n_hyperparams + hyperparam.0) * self.n_risks + risk]
    }

    fn check_range(&self) -> Result<()> {
        for (i, &value) in self.values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                let risk = i % self.n_risks;
                let hyperparam = (i / self.n_risks) % self.n_hyperparams;
                let sample = i / (self.n_risks * self.n_hyperparams);
                return Err(Error::OutOfRangeRisk {
                    sample,
                    hyperparam,
                    risk,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Reliability targets and testing configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProblem {
    /// One target per constrained risk; constrained risks occupy the first
    /// `alphas.len()` risk columns.
    pub alphas: Vec<f64>,
    pub delta: f64,
    pub split_fraction: f64,
    pub seed: u64,
}

impl SelectionProblem {
    pub fn new(alphas: Vec<f64>, delta: f64) -> Self {
        Self {
            alphas,
            delta,
            split_fraction: DEFAULT_SPLIT_FRACTION,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_split_fraction(mut self, fraction: f64) -> Self {
        self.split_fraction = fraction;
        self
    }

    pub fn n_constrained(&self) -> usize {
        self.alphas.len()
    }

    fn check(&self, n_risks: usize) -> Result<()> {
        let lc = self.alphas.len();
        if lc == 0 || lc > n_risks {
            return Err(Error::BadConfig(format!(
                "{lc} constrained risks for a table with {n_risks} risks"
            )));
        }
        for (l, &a) in self.alphas.iter().enumerate() {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::BadConfig(format!("alpha[{l}] = {a} not in (0, 1)")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::BadConfig(format!("delta = {} not in (0, 1)", self.delta)));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::BadConfig(format!(
                "split fraction = {} not in (0, 1)",
                self.split_fraction
            )));
        }
        Ok(())
    }
}

/// A risk table paired with a problem that has passed validation.
#[derive(Debug, Clone)]
pub struct Calibration {
    table: RiskTable,
    problem: SelectionProblem,
}

impl Calibration {
    pub fn table(&self) -> &RiskTable {
        &self.table
    }

    pub fn problem(&self) -> &SelectionProblem {
        &self.problem
    }

    pub fn n_constrained(&self) -> usize {
        self.problem.alphas.len()
    }

    /// View over every sample, used by the LTT baseline.
    pub fn full_view(&self) -> SubsetView<'_> {
        SubsetView {
            cal: self,
            indices: SubsetIndices::All(self.table.n_samples),
            means: OnceLock::new(),
        }
    }

    pub fn view<'a>(&'a self, indices: &'a [usize]) -> Result<SubsetView<'a>> {
        if indices.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = indices.iter().find(|&&z| z >= self.table.n_samples) {
            return Err(Error::DimensionMismatch(format!(
                "sample index {bad} out of range for {} samples",
                self.table.n_samples
            )));
        }
        Ok(SubsetView {
            cal: self,
            indices: SubsetIndices::Listed(indices),
            means: OnceLock::new(),
        })
    }
}

/// Checks every table/problem invariant and returns the validated handle.
pub fn validate_risk_table(table: RiskTable, problem: SelectionProblem) -> Result<Calibration> {
    problem.check(table.n_risks)?;
    if table.n_hyperparams == 0 {
        return Err(Error::DimensionMismatch("no hyperparameters".into()));
    }
    if table.n_samples == 0 {
        return Err(Error::DimensionMismatch("no samples".into()));
    }
    table.check_range()?;
    Ok(Calibration { table, problem })
}

/// Partition of sample indices into the optimisation and testing halves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub opt: Vec<usize>,
    pub mht: Vec<usize>,
}

/// Uniformly random split with `round(fraction * n_samples)` samples on the
/// optimisation side. Both sides are returned in ascending order.
pub fn split_data(n_samples: usize, fraction: f64, seed: u64) -> Result<DataSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::BadConfig(format!("split fraction {fraction} not in (0, 1)")));
    }
    let n_opt = (fraction * n_samples as f64).round() as usize;
    if n_opt == 0 || n_opt >= n_samples {
        return Err(Error::TooFewSamples {
            n_samples,
            fraction,
        });
    }
    let mut perm: Vec<usize> = (0..n_samples).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let mut opt = perm[..n_opt].to_vec();
    let mut mht = perm[n_opt..].to_vec();
    opt.sort_unstable();
    mht.sort_unstable();
    Ok(DataSplit { opt, mht })
}

#[derive(Debug, Clone, Copy)]
enum SubsetIndices<'a> {
    All(usize),
    Listed(&'a [usize]),
}

/// Read-only access to the samples of one side of a split.
///
/// Empirical risks are computed on first use and cached inside the view, so
/// the cache is tied to the subset and can never mix the two halves.
#[derive(Debug)]
pub struct SubsetView<'a> {
    cal: &'a Calibration,
    indices: SubsetIndices<'a>,
    means: OnceLock<Vec<f64>>,
}

impl<'a> SubsetView<'a> {
    pub fn calibration(&self) -> &'a Calibration {
        self.cal
    }

    pub fn table(&self) -> &'a RiskTable {
        &self.cal.table
    }

    pub fn len(&self) -> usize {
        match self.indices {
            SubsetIndices::All(n) => n,
            SubsetIndices::Listed(ix) => ix.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Absolute sample index of the `k`-th sample in this view.
    #[inline]
    pub fn sample_index(&self, k: usize) -> usize {
        match self.indices {
            SubsetIndices::All(_) => k,
            SubsetIndices::Listed(ix) => ix[k],
        }
    }

    /// Loss of the `k`-th sample of this view.
    #[inline]
    pub fn loss(&self, k: usize, hyperparam: HyperparamId, risk: usize) -> f64 {
        self.cal.table.get(self.sample_index(k), hyperparam, risk)
    }

    fn means(&self) -> &[f64] {
        self.means.get_or_init(|| {
            let t = &self.cal.table;
            let (nh, nr) = (t.n_hyperparams, t.n_risks);
            let mut sums = vec![0.0; nh * nr];
            for k in 0..self.len() {
                let z = self.sample_index(k);
                let row = &t.values[z * nh * nr..(z + 1) * nh * nr];
                for (s, v) in sums.iter_mut().zip(row) {
                    *s += v;
                }
            }
            let n = self.len() as f64;
            sums.iter_mut().for_each(|s| *s /= n);
            sums
        })
    }

    pub fn empirical_risk(&self, hyperparam: HyperparamId, risk: usize) -> f64 {
        self.means()[hyperparam.0 * self.cal.table.n_risks + risk]
    }

    /// All `L` empirical risks of one hyperparameter, constrained first.
    pub fn risk_vector(&self, hyperparam: HyperparamId) -> Vec<f64> {
        let nr = self.cal.table.n_risks;
        self.means()[hyperparam.0 * nr..(hyperparam.0 + 1) * nr].to_vec()
    }

    pub fn pvalue(&self, hyperparam: HyperparamId, risk: usize) -> f64 {
        hoeffding_pvalue(
            self.cal.problem.alphas[risk],
            self.empirical_risk(hyperparam, risk),
            self.len(),
        )
    }

    /// Maximum of the per-constraint p-values.
    pub fn combined_pvalue(&self, hyperparam: HyperparamId) -> f64 {
        (0..self.cal.n_constrained())
            .map(|l| self.pvalue(hyperparam, l))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mean loss of `hyperparam` on `risk` over the given samples.
pub fn empirical_risk(
    table: &RiskTable,
    subset: &[usize],
    hyperparam: HyperparamId,
    risk: usize,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let sum: f64 = subset.iter().map(|&z| table.get(z, hyperparam, risk)).sum();
    Ok(sum / subset.len() as f64)
}

/// `exp(-2 n ((alpha - risk)_+)^2)`, floored at the smallest positive `f64`
/// so that the result stays in `(0, 1]` after underflow.
pub fn hoeffding_pvalue(alpha: f64, empirical_risk: f64, n: usize) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0, "alpha = {alpha}");
    debug_assert!((0.0..=1.0).contains(&empirical_risk), "risk = {empirical_risk}");
    debug_assert!(n >= 1);
    let gap = (alpha - empirical_risk).max(0.0);
    if gap == 0.0 {
        return 1.0;
    }
    (-2.0 * n as f64 * gap * gap).exp().max(f64::from_bits(1))
}

pub fn combined_pvalue(per_risk: &[f64]) -> Result<f64> {
    per_risk
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::EmptyVector)
}
