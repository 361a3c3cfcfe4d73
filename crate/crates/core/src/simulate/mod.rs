//! Monte Carlo harness: synthetic Bernoulli risk tables with known ground
//! truth, empirical FDR and power, ablation sweeps and reference oracles.

mod oracle;
mod priors;
mod scenario;
mod trials;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::RiskTable;

pub use oracle::{oracle_dagger, random_layered_graph, ORACLE_MAX_NODES};
pub use priors::{corrupt_priors, oracle_prior};
pub use scenario::{standard_battery, PriorKind, PriorPlan, Scenario};
pub use trials::{
    run_trials, summary_csv, sweep_corruption, sweep_depth, sweep_trials_csv, FdrReport, Quantiles, SweepPoint,
    TrialRecord, TrialSetup,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Correlation {
    #[default]
    Independent,
    /// Every sample carries one latent uniform per risk, shared by all
    /// hyperparameters with weight `rho`.
    SharedNoise { rho: f64 },
}

/// How auxiliary losses relate to the first constrained loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxMode {
    /// Drawn like constrained losses, with their own latent variables.
    #[default]
    Independent,
    /// Driven by the same uniform as constrained risk 0 in the opposite
    /// direction, so a lower constrained loss means a higher auxiliary loss.
    Antithetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// `true_means[h][l]` for each constrained risk `l`.
    pub true_means: Vec<Vec<f64>>,
    /// `aux_means[h][k]` for each auxiliary risk `k`; may be empty.
    #[serde(default)]
    pub aux_means: Vec<Vec<f64>>,
    #[serde(default)]
    pub correlation: Correlation,
    #[serde(default)]
    pub aux_mode: AuxMode,
    pub n_samples: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_hyperparams(&self) -> usize {
        self.true_means.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.true_means.first().map_or(0, Vec::len)
    }

    pub fn n_aux(&self) -> usize {
        self.aux_means.first().map_or(0, Vec::len)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n_hyperparams();
        if n == 0 || self.n_constrained() == 0 {
            return Err(Error::BadSpec("at least one hyperparameter and one constrained risk".into()));
        }
        if self.n_samples < 2 {
            return Err(Error::BadSpec(format!("n_samples = {} is below 2", self.n_samples)));
        }
        if self.true_means.iter().any(|r| r.len() != self.n_constrained()) {
            return Err(Error::BadSpec("true_means rows differ in length".into()));
        }
        if !self.aux_means.is_empty()
            && (self.aux_means.len() != n || self.aux_means.iter().any(|r| r.len() != self.n_aux()))
        {
            return Err(Error::BadSpec(format!(
                "aux_means must have {n} rows of equal length"
            )));
        }
        let all = self.true_means.iter().chain(&self.aux_means).flatten();
        if let Some(bad) = all.copied().find(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::BadSpec(format!("mean {bad} outside [0, 1]")));
        }
        if let Correlation::SharedNoise { rho } = self.correlation {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::BadSpec(format!("rho = {rho} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Same spec with another seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Hyperparameters whose every true constrained mean is within target.
    pub fn truly_reliable(&self, alphas: &[f64]) -> Vec<bool> {
        self.true_means
            .iter()
            .map(|row| row.iter().zip(alphas).all(|(m, a)| m <= a))
            .collect()
    }
}

/// CDF of `a U + b U'` for independent standard uniforms.
fn weighted_uniform_sum_cdf(x: f64, a: f64, b: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    if b == 0.0 {
        return (x / a).clamp(0.0, 1.0);
    }
    if x <= 0.0 {
        0.0
    } else if x < b {
        x * x / (2.0 * a * b)
    } else if x < a {
        (x - b / 2.0) / a
    } else if x < a + b {
        1.0 - (a + b - x).powi(2) / (2.0 * a * b)
    } else {
        1.0
    }
}

/// Draws a Bernoulli loss table. Under shared noise the mixed latent
/// `(1 - rho) u' + rho u` is mapped through its own CDF before thresholding,
/// so each column is exactly Bernoulli(mean).
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<RiskTable> {
    spec.check()?;
    let (n_h, lc, n_aux) = (spec.n_hyperparams(), spec.n_constrained(), spec.n_aux());
    let n_r = lc + n_aux;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rho = match spec.correlation {
        Correlation::Independent => 0.0,
        Correlation::SharedNoise { rho } => rho,
    };
    let mut values = vec![0.0; spec.n_samples * n_h * n_r];
    let mut shared = vec![0.0; n_r];
    let mut first = vec![0.0; n_h];
    for z in 0..spec.n_samples {
        for s in shared.iter_mut() {
            *s = rng.random::<f64>();
        }
        for h in 0..n_h {
            for l in 0..n_r {
                let own: f64 = rng.random();
                let u = weighted_uniform_sum_cdf((1.0 - rho) * own + rho * shared[l], 1.0 - rho, rho);
                if l == 0 {
                    first[h] = u;
                }
                let loss = if l < lc {
                    u < spec.true_means[h][l]
                } else {
                    let mean = spec.aux_means[h][l - lc];
                    match spec.aux_mode {
                        AuxMode::Independent => u < mean,
                        AuxMode::Antithetic => first[h] >= 1.0 - mean,
                    }
                };
                values[(z * n_h + h) * n_r + l] = f64::from(loss);
            }
        }
    }
    RiskTable::new(spec.n_samples, n_h, n_r, values)
}

/// Independent 64-bit seed for `(trial, purpose)` drawn from the ChaCha
/// stream `trial` of `master`.
pub fn derive_seed(master: u64, trial: u64, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng.set_word_pos(u128::from(purpose) * 2);
    rng.next_u64()
}
