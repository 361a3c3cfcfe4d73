//! Depth assignment by agglomerative clustering of scalar scores.
//!
//! Average linkage on absolute score differences. In one dimension every
//! cluster produced this way is a contiguous run of the sorted scores, and
//! the closest pair of clusters is always a pair of neighbouring runs, so the
//! merge loop only scans adjacent pairs. For neighbouring runs `A < B` the
//! mean pairwise difference is `mean(B) - mean(A)`.

use serde::{Deserialize, Serialize};

use crate::risk::HyperparamId;

/// Ordered partition of the front into depth levels; `clusters[0]` is depth 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthAssignment {
    pub clusters: Vec<Vec<HyperparamId>>,
}

impl DepthAssignment {
    pub fn depth_count(&self) -> usize {
        self.clusters.len()
    }

    /// 1-based depth of `id`, if it is assigned.
    pub fn depth_of(&self, id: HyperparamId) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.contains(&id))
            .map(|d| d + 1)
    }

    /// One level per element of `order`, most reliable first.
    pub fn chain(order: &[HyperparamId]) -> Self {
        Self {
            clusters: order.iter().map(|&h| vec![h]).collect(),
        }
    }
}

/// `ceil(n / 5)`, kept within `[2, n - 1]` once there are at least 3 items.
pub fn default_depth(n: usize) -> usize {
    let d = n.div_ceil(5).max(1);
    if n >= 3 {
        d.clamp(2, n - 1)
    } else {
        d.min(n.max(1))
    }
}

struct Run {
    /// Positions into the sorted order, contiguous.
    start: usize,
    end: usize,
    sum: f64,
    min_id: HyperparamId,
}

impl Run {
    fn mean(&self) -> f64 {
        self.sum / (self.end - self.start) as f64
    }
}

/// Clusters `members` (with matching `scores`) into `depth` levels ordered by
/// ascending mean score. `depth` outside `[1, members.len()]` is clamped.
pub fn cluster_depths(members: &[HyperparamId], scores: &[f64], depth: usize) -> DepthAssignment {
    assert_eq!(members.len(), scores.len(), "one score per member");
    let n = members.len();
    if n == 0 {
        return DepthAssignment { clusters: vec![] };
    }
    let target = if depth > n {
        log::warn!("depth {depth} exceeds the {n} items to cluster; clamping to {n}");
        n
    } else if depth == 0 {
        log::warn!("depth 0 requested; using a single level");
        1
    } else {
        depth
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(members[a].cmp(&members[b])));

    let mut runs: Vec<Run> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| Run {
            start: pos,
            end: pos + 1,
            sum: scores[i],
            min_id: members[i],
        })
        .collect();

    while runs.len() > target {
        let mut best = 0;
        let mut best_key = (f64::INFINITY, HyperparamId(usize::MAX));
        for k in 0..runs.len() - 1 {
            let dist = (runs[k + 1].mean() - runs[k].mean()).abs();
            let key = (dist, runs[k].min_id.min(runs[k + 1].min_id));
            if key.0 < best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
                best = k;
                best_key = key;
            }
        }
        let right = runs.remove(best + 1);
        let left = &mut runs[best];
        left.end = right.end;
        left.sum += right.sum;
        left.min_id = left.min_id.min(right.min_id);
    }

    let clusters = runs
        .iter()
        .map(|r| {
            let mut c: Vec<HyperparamId> = order[r.start..r.end].iter().map(|&i| members[i]).collect();
            c.sort_unstable();
            c
        })
        .collect();
    DepthAssignment { clusters }
}
