//! Straight-from-the-definitions DAGGER used to cross-check the optimised
//! implementation. Deliberately naive: recomputes everything per call and
//! shares no helpers with the testing module.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{GraphNode, ReliabilityGraph};
use crate::risk::HyperparamId;
use crate::testing::Reshape;

pub const ORACLE_MAX_NODES: usize = 12;

struct Dag {
    depth: BTreeMap<HyperparamId, usize>,
    parents: BTreeMap<HyperparamId, Vec<HyperparamId>>,
}

impl Dag {
    fn children(&self, i: HyperparamId) -> Vec<HyperparamId> {
        self.parents
            .iter()
            .filter(|(_, ps)| ps.contains(&i))
            .map(|(c, _)| *c)
            .collect()
    }

    fn v(&self, i: HyperparamId) -> f64 {
        let ch = self.children(i);
        if ch.is_empty() {
            return 1.0;
        }
        ch.iter().map(|&j| self.v(j) / self.parents[&j].len() as f64).sum()
    }

    fn m(&self, i: HyperparamId) -> f64 {
        let ch = self.children(i);
        if ch.is_empty() {
            return 1.0;
        }
        1.0 + ch.iter().map(|&j| self.m(j) / self.parents[&j].len() as f64).sum::<f64>()
    }
}

/// Discovery set of DAGGER on `graph`.
pub fn oracle_dagger(
    graph: &ReliabilityGraph,
    pvalues: &BTreeMap<HyperparamId, f64>,
    delta: f64,
    reshape: Reshape,
) -> Result<BTreeSet<HyperparamId>> {
    if graph.len() > ORACLE_MAX_NODES {
        return Err(Error::TooLarge {
            max: ORACLE_MAX_NODES,
            got: graph.len(),
        });
    }
    let dag = Dag {
        depth: graph.nodes().iter().map(|n| (n.id, n.depth)).collect(),
        parents: graph.nodes().iter().map(|n| (n.id, n.parents.clone())).collect(),
    };
    let leaves = dag.depth.keys().filter(|&&i| dag.children(i).is_empty()).count();
    let mut h_v = 0.0;
    for k in 1..=leaves {
        h_v += 1.0 / k as f64;
    }
    let beta = |x: f64| match reshape {
        Reshape::Identity => x,
        Reshape::BenjaminiYekutieli => x / h_v,
    };
    let p = |i: HyperparamId| {
        pvalues
            .get(&i)
            .copied()
            .ok_or_else(|| Error::DimensionMismatch(format!("no p-value for node {i}")))
    };

    let max_depth = dag.depth.values().copied().max().unwrap_or(0);
    let mut reliable = BTreeSet::new();
    let mut rejections_so_far = 0usize;
    for d in 1..=max_depth {
        let level: Vec<HyperparamId> = dag.depth.iter().filter(|(_, &dd)| dd == d).map(|(i, _)| *i).collect();
        let testable: Vec<HyperparamId> = level
            .iter()
            .copied()
            .filter(|i| dag.parents[i].iter().all(|q| reliable.contains(q)))
            .collect();
        let threshold = |i: HyperparamId, r: usize| {
            dag.v(i) / leaves as f64 * delta / beta(dag.m(i) + r as f64 + rejections_so_far as f64 - 1.0)
        };
        let mut big_r = 0;
        for r in 1..=level.len() {
            let mut count = 0;
            for &i in &testable {
                if p(i)? <= threshold(i, r) {
                    count += 1;
                }
            }
            if count >= r {
                big_r = r;
            }
        }
        let mut found_here = Vec::new();
        if big_r > 0 {
            for &i in &testable {
                if p(i)? <= threshold(i, big_r) {
                    found_here.push(i);
                }
            }
        }
        rejections_so_far += found_here.len();
        reliable.extend(found_here);
    }
    Ok(reliable)
}

/// Random level-structured DAG with `1..=max_nodes` nodes. Ids are shuffled
/// so they do not follow the depth order.
pub fn random_layered_graph<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> ReliabilityGraph {
    let n = rng.random_range(1..=max_nodes.max(1));
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let mut levels: Vec<Vec<usize>> = vec![vec![ids[0]]];
    for &id in &ids[1..] {
        if rng.random_bool(0.45) {
            levels.push(vec![id]);
        } else {
            let k = rng.random_range(0..levels.len());
            levels[k].push(id);
        }
    }
    let mut nodes = Vec::with_capacity(n);
    for (d, level) in levels.iter().enumerate() {
        for &id in level {
            let parents = if d == 0 {
                Vec::new()
            } else {
                let above = &levels[d - 1];
                let mut ps: Vec<HyperparamId> = above
                    .iter()
                    .filter(|_| rng.random_bool(0.5))
                    .map(|&q| HyperparamId(q))
                    .collect();
                if ps.is_empty() {
                    ps.push(HyperparamId(*above.choose(rng).expect("level above is non-empty")));
                }
                ps
            };
            nodes.push(GraphNode {
                id: HyperparamId(id),
                label: format!("h{id}"),
                depth: d + 1,
                score: None,
                parents,
            });
        }
    }
    ReliabilityGraph::new(nodes).expect("generated graph is layered")
}
