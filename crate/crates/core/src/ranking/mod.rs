//! Expected-reliability ranking of the Pareto front: pairwise counts from
//! data and priors, Bradley-Terry scores, and depth levels.

mod bradley_terry;
mod clustering;
mod prior;

pub use bradley_terry::{
    bt_log_likelihood, data_prob, fit_bt_mm, fit_bt_mm_observed, pairwise_counts, BtScores,
    PairwiseCounts, DEFAULT_MAX_ITER, DEFAULT_TOL, SCORE_FLOOR,
};
pub use clustering::{cluster_depths, default_depth, DepthAssignment};
pub use prior::PriorSpec;
