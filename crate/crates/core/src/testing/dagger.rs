//! Level-by-level step-up testing on the reliability graph.
//!
//! At depth `d` the candidate set holds the nodes whose parents were all
//! found reliable. For a step-up level `r` the threshold of candidate `i` is
//!
//! ```text
//! delta_i(r) = (v_i / V) * delta / reshape(m_i + r + R_prev - 1)
//! ```
//!
//! where `R_prev` counts rejections at shallower depths. The chosen level is
//! the largest `r` with at least `r` candidates under `delta_i(r)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EffectiveCounts, ReliabilityGraph};
use crate::risk::HyperparamId;

/// Threshold modifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reshape {
    Identity,
    /// Divides by the harmonic number of the leaf count.
    #[default]
    #[serde(rename = "by")]
    BenjaminiYekutieli,
}

impl Reshape {
    pub fn apply(self, x: f64, leaves: usize) -> f64 {
        match self {
            Reshape::Identity => x,
            Reshape::BenjaminiYekutieli => by_reshape(x, leaves),
        }
    }
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// `x / H_V` with `H_V` the `V`-th harmonic number.
pub fn by_reshape(x: f64, leaves: usize) -> f64 {
    debug_assert!(leaves >= 1);
    x / harmonic(leaves.max(1))
}

/// Threshold for a node with effective counts `(v, m)` at step-up level `r`.
pub fn dagger_threshold(
    v: f64,
    m: f64,
    leaves: usize,
    r: usize,
    r_prev: usize,
    delta: f64,
    reshape: Reshape,
) -> f64 {
    debug_assert!(r >= 1);
    let x = m + r as f64 + r_prev as f64 - 1.0;
    (v / leaves as f64) * delta / reshape.apply(x, leaves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDecision {
    pub node: HyperparamId,
    pub tested: bool,
    pub threshold: Option<f64>,
    pub pvalue: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaggerLevel {
    pub depth: usize,
    pub candidates: Vec<HyperparamId>,
    /// Rejections at shallower depths.
    pub prior_rejections: usize,
    /// Chosen step-up level; zero when nothing is rejected.
    pub step_up: usize,
    /// Rejections at this depth and above.
    pub cumulative_rejections: usize,
    /// One entry per node at this depth, tested or not.
    pub decisions: Vec<TestDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaggerTrace {
    pub delta: f64,
    pub reshape: Reshape,
    pub leaves: usize,
    pub levels: Vec<DaggerLevel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaggerOutcome {
    pub discovered: Vec<HyperparamId>,
    pub trace: DaggerTrace,
}

/// Step-up at one depth. Returns the chosen level `R` and one tested decision
/// per candidate, in candidate order.
pub fn dagger_stepup(
    candidates: &[HyperparamId],
    pvalues: &BTreeMap<HyperparamId, f64>,
    r_prev: usize,
    counts: &EffectiveCounts,
    delta: f64,
    reshape: Reshape,
) -> Result<(usize, Vec<TestDecision>)> {
    let info: Vec<(HyperparamId, f64, f64, f64)> = candidates
        .iter()
        .map(|&h| {
            let c = counts
                .get(h)
                .ok_or_else(|| Error::InvalidGraph(format!("no effective counts for {h}")))?;
            let p = *pvalues
                .get(&h)
                .ok_or_else(|| Error::DimensionMismatch(format!("no p-value for node {h}")))?;
            Ok((h, p, c.v, c.m))
        })
        .collect::<Result<_>>()?;
    let threshold =
        |v: f64, m: f64, r: usize| dagger_threshold(v, m, counts.leaves, r, r_prev, delta, reshape);

    let step_up = (1..=info.len())
        .rev()
        .find(|&r| info.iter().filter(|&&(_, p, v, m)| p <= threshold(v, m, r)).count() >= r)
        .unwrap_or(0);

    let decisions = info
        .iter()
        .map(|&(node, pvalue, v, m)| {
            let t = threshold(v, m, step_up.max(1));
            TestDecision {
                node,
                tested: true,
                threshold: Some(t),
                pvalue,
                reliable: step_up > 0 && pvalue <= t,
            }
        })
        .collect();
    Ok((step_up, decisions))
}

/// Tests depths in order; a node is a candidate only once every parent has
/// been found reliable, so a failed node blocks all of its descendants.
pub fn run_dagger(
    graph: &ReliabilityGraph,
    counts: &EffectiveCounts,
    pvalues: &BTreeMap<HyperparamId, f64>,
    delta: f64,
    reshape: Reshape,
) -> Result<DaggerOutcome> {
    let mut reliable: BTreeSet<HyperparamId> = BTreeSet::new();
    let mut levels = Vec::with_capacity(graph.depth_count());
    let mut cumulative = 0;
    for depth in 1..=graph.depth_count() {
        let nodes = graph.level(depth);
        let candidates: Vec<HyperparamId> = nodes
            .iter()
            .copied()
            .filter(|&h| graph.parents(h).iter().all(|p| reliable.contains(p)))
            .collect();
        let (step_up, tested) = dagger_stepup(&candidates, pvalues, cumulative, counts, delta, reshape)?;
        let prior_rejections = cumulative;
        let mut decisions = Vec::with_capacity(nodes.len());
        let mut tested = tested.into_iter().peekable();
        for h in nodes {
            if tested.peek().is_some_and(|d| d.node == h) {
                let d = tested.next().unwrap();
                if d.reliable {
                    reliable.insert(h);
                    cumulative += 1;
                }
                decisions.push(d);
            } else {
                let pvalue = *pvalues
                    .get(&h)
                    .ok_or_else(|| Error::DimensionMismatch(format!("no p-value for node {h}")))?;
                decisions.push(TestDecision {
                    node: h,
                    tested: false,
                    threshold: None,
                    pvalue,
                    reliable: false,
                });
            }
        }
        levels.push(DaggerLevel {
            depth,
            candidates,
            prior_rejections,
            step_up,
            cumulative_rejections: cumulative,
            decisions,
        });
    }
    Ok(DaggerOutcome {
        discovered: reliable.into_iter().collect(),
        trace: DaggerTrace {
            delta,
            reshape,
            leaves: counts.leaves,
            levels,
        },
    })
}
