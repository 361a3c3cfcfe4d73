//! Fixed-sequence testing with a failure budget, for FDR under arbitrary
//! dependence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::HyperparamId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FstConfig {
    /// Testing stops once this many hypotheses have failed.
    pub k: usize,
    pub delta: f64,
}

/// `ceil(0.1 * n)`, at least one.
pub fn default_k(n: usize) -> usize {
    n.div_ceil(10).max(1)
}

/// Critical levels: `delta / k` for the first `k` positions, then
/// `(n - k + 1) delta / ((n - i + 1) k)` for position `i > k` (1-based).
pub fn fst_thresholds(n_total: usize, cfg: &FstConfig) -> Result<Vec<f64>> {
    let k = cfg.k;
    if k == 0 || k > n_total {
        return Err(Error::BadK { k, n: n_total });
    }
    let (n, kf) = (n_total as f64, k as f64);
    Ok((1..=n_total)
        .map(|i| {
            if i <= k {
                cfg.delta / kf
            } else {
                (n - kf + 1.0) * cfg.delta / ((n - i as f64 + 1.0) * kf)
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FstStep {
    pub node: HyperparamId,
    pub pvalue: f64,
    pub threshold: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FstTrace {
    pub k: usize,
    pub delta: f64,
    /// Tested prefix, in order.
    pub steps: Vec<FstStep>,
    /// Nodes left untested after the failure budget ran out.
    pub untested: Vec<HyperparamId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FstOutcome {
    /// Reliable nodes in testing order.
    pub discovered: Vec<HyperparamId>,
    pub trace: FstTrace,
}

/// Tests `ordered` (most reliable first) against the critical levels and
/// stops after `k` failures. Discoveries are the passing nodes of the tested
/// prefix.
pub fn run_fst(ordered: &[HyperparamId], pvalues: &[f64], cfg: &FstConfig) -> Result<FstOutcome> {
    if pvalues.len() != ordered.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} p-values for {} hypotheses",
            pvalues.len(),
            ordered.len()
        )));
    }
    let thresholds = fst_thresholds(ordered.len(), cfg)?;
    let mut steps = Vec::new();
    let mut failures = 0;
    for (i, (&node, &pvalue)) in ordered.iter().zip(pvalues).enumerate() {
        if failures == cfg.k {
            break;
        }
        let reliable = pvalue <= thresholds[i];
        failures += usize::from(!reliable);
        steps.push(FstStep {
            node,
            pvalue,
            threshold: thresholds[i],
            reliable,
        });
    }
    let untested = ordered[steps.len()..].to_vec();
    Ok(FstOutcome {
        discovered: steps.iter().filter(|s| s.reliable).map(|s| s.node).collect(),
        trace: FstTrace {
            k: cfg.k,
            delta: cfg.delta,
            steps,
            untested,
        },
    })
}
