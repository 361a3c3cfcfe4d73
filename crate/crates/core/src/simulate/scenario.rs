use serde::{Deserialize, Serialize};

use super::{AuxMode, Correlation, SyntheticSpec};
use crate::error::{Error, Result};
use crate::pipeline::MethodConfig;
use crate::risk::{SelectionProblem, DEFAULT_DELTA, DEFAULT_SEED, DEFAULT_SPLIT_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Every pair at 0.5.
    #[default]
    None,
    /// Ordering taken from the true means.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorPlan {
    pub kind: PriorKind,
    pub pseudocount: f64,
    /// Probability of swapping each pair before a trial.
    pub corruption: f64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_split() -> f64 {
    DEFAULT_SPLIT_FRACTION
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// A synthetic battery plus everything needed to test on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub alphas: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    /// Master seed for splits and prior corruption; data seeds come from
    /// `synthetic.seed`.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub synthetic: SyntheticSpec,
    #[serde(default)]
    pub prior: PriorPlan,
    #[serde(default)]
    pub config: MethodConfig,
}

impl Scenario {
    pub fn problem(&self) -> SelectionProblem {
        SelectionProblem::new(self.alphas.clone(), self.delta)
            .with_split_fraction(self.split_fraction)
            .with_seed(self.seed)
    }

    pub fn check(&self) -> Result<()> {
        self.synthetic.check()?;
        if self.alphas.len() != self.synthetic.n_constrained() {
            return Err(Error::BadSpec(format!(
                "{} alphas for {} constrained risks",
                self.alphas.len(),
                self.synthetic.n_constrained()
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::BadSpec(format!("alpha {a} not in (0, 1)")));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::BadSpec(format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(self.prior.pseudocount >= 0.0 && self.prior.pseudocount.is_finite()) {
            return Err(Error::BadSpec(format!("pseudocount {} is negative", self.prior.pseudocount)));
        }
        if !(0.0..=1.0).contains(&self.prior.corruption) {
            return Err(Error::BadFraction(self.prior.corruption));
        }
        self.config.check()
    }

    pub fn with_prior(mut self, prior: PriorPlan) -> Self {
        self.prior = prior;
        self
    }
}

/// Twenty hyperparameters against `alpha = 0.3`: five hard nulls from 0.35,
/// five easy nulls from 0.6, five alternatives from 0.2 down and five from 0
/// up, interleaved by index. One auxiliary risk mirrors the constrained loss
/// so every hyperparameter sits on the Pareto front.
pub fn standard_battery(correlation: Correlation) -> Scenario {
    let alpha = 0.3;
    let means: Vec<f64> = (0..20)
        .map(|i| {
            let j = (i / 4) as f64 * 0.01;
            match i % 4 {
                0 => alpha + 0.05 + j,
                1 => alpha - 0.1 - j,
                2 => alpha + 0.3 + j,
                _ => alpha - 0.3 + j,
            }
        })
        .collect();
    let name = match correlation {
        Correlation::Independent => "standard".to_string(),
        Correlation::SharedNoise { rho } => format!("standard-shared-{rho}"),
    };
    Scenario {
        name,
        alphas: vec![alpha],
        delta: 0.1,
        split_fraction: DEFAULT_SPLIT_FRACTION,
        seed: DEFAULT_SEED,
        synthetic: SyntheticSpec {
            true_means: means.iter().map(|&m| vec![m]).collect(),
            aux_means: means.iter().map(|&m| vec![1.0 - m]).collect(),
            correlation,
            aux_mode: AuxMode::Antithetic,
            n_samples: 500,
            seed: 2024,
        },
        prior: PriorPlan::default(),
        config: MethodConfig::default(),
    }
}
