//! The reliability graph: a level-structured DAG over the Pareto front in
//! which every edge runs from depth `d - 1` to depth `d`.

mod export;
mod lasso;
mod learn;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::HyperparamId;

pub use export::{render_dot, render_json, to_dot, to_json, ExportNode, GraphExport};
pub use lasso::{
    lasso_gradient, lasso_objective, nonneg_lasso, LassoProblem, LassoSolution, KKT_TOL,
};
pub use learn::{learn_edges, DEFAULT_TAU};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: HyperparamId,
    pub label: String,
    /// 1-based depth level.
    pub depth: usize,
    /// Ranking score used for the depth assignment, when known.
    pub score: Option<f64>,
    /// Parents at `depth - 1`, ascending.
    pub parents: Vec<HyperparamId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphNodes", into = "GraphNodes")]
pub struct ReliabilityGraph {
    nodes: Vec<GraphNode>,
    position: BTreeMap<HyperparamId, usize>,
    children: BTreeMap<HyperparamId, Vec<HyperparamId>>,
}

#[derive(Serialize, Deserialize)]
struct GraphNodes {
    nodes: Vec<GraphNode>,
}

impl TryFrom<GraphNodes> for ReliabilityGraph {
    type Error = Error;
    fn try_from(value: GraphNodes) -> Result<Self> {
        Self::new(value.nodes)
    }
}

impl From<ReliabilityGraph> for GraphNodes {
    fn from(g: ReliabilityGraph) -> Self {
        GraphNodes { nodes: g.nodes }
    }
}

impl ReliabilityGraph {
    /// Validates the level structure and sorts nodes by `(depth, id)`.
    pub fn new(mut nodes: Vec<GraphNode>) -> Result<Self> {
        nodes.sort_by_key(|n| (n.depth, n.id));
        let mut depth_of = BTreeMap::new();
        for n in &nodes {
            if depth_of.insert(n.id, n.depth).is_some() {
                return Err(Error::InvalidGraph(format!("node {} appears twice", n.id)));
            }
            if n.depth == 0 {
                return Err(Error::InvalidGraph(format!("node {} has depth 0", n.id)));
            }
        }
        let max_depth = nodes.last().map_or(0, |n| n.depth);
        let present: BTreeSet<usize> = nodes.iter().map(|n| n.depth).collect();
        if let Some(missing) = (1..=max_depth).find(|d| !present.contains(d)) {
            return Err(Error::InvalidGraph(format!("depth {missing} has no nodes")));
        }
        let mut children: BTreeMap<HyperparamId, Vec<HyperparamId>> =
            nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for n in &mut nodes {
            n.parents.sort_unstable();
            n.parents.dedup();
            if n.depth == 1 && !n.parents.is_empty() {
                return Err(Error::InvalidGraph(format!("root {} has parents", n.id)));
            }
            if n.depth > 1 && n.parents.is_empty() {
                return Err(Error::InvalidGraph(format!(
                    "node {} at depth {} has no parent",
                    n.id, n.depth
                )));
            }
            for p in &n.parents {
                match depth_of.get(p) {
                    Some(&d) if d + 1 == n.depth => children.get_mut(p).unwrap().push(n.id),
                    Some(&d) => {
                        return Err(Error::InvalidGraph(format!(
                            "edge {p} -> {} joins depth {d} to depth {}",
                            n.id, n.depth
                        )))
                    }
                    None => {
                        return Err(Error::InvalidGraph(format!("unknown parent {p} of {}", n.id)))
                    }
                }
            }
        }
        children.values_mut().for_each(|c| c.sort_unstable());
        let position = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        Ok(Self {
            nodes,
            position,
            children,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new()).expect("empty graph is valid")
    }

    /// Nodes sorted by `(depth, id)`.
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: HyperparamId) -> Option<&GraphNode> {
        self.position.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn depth_count(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.depth)
    }

    /// Node ids at `depth` (1-based), ascending.
    pub fn level(&self, depth: usize) -> Vec<HyperparamId> {
        self.nodes
            .iter()
            .filter(|n| n.depth == depth)
            .map(|n| n.id)
            .collect()
    }

    pub fn parents(&self, id: HyperparamId) -> &[HyperparamId] {
        self.node(id).map_or(&[], |n| &n.parents)
    }

    pub fn children(&self, id: HyperparamId) -> &[HyperparamId] {
        self.children.get(&id).map_or(&[], |c| c.as_slice())
    }

    pub fn edges(&self) -> Vec<(HyperparamId, HyperparamId)> {
        self.nodes
            .iter()
            .flat_map(|n| n.parents.iter().map(move |&p| (p, n.id)))
            .collect()
    }

    pub fn leaves(&self) -> Vec<HyperparamId> {
        self.nodes
            .iter()
            .filter(|n| self.children(n.id).is_empty())
            .map(|n| n.id)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub id: HyperparamId,
    /// Effective number of leaves below the node.
    pub v: f64,
    /// Effective number of nodes below and including the node.
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCounts {
    /// Same order as [`ReliabilityGraph::nodes`].
    pub nodes: Vec<NodeCounts>,
    /// Number of leaf nodes in the graph.
    pub leaves: usize,
}

impl EffectiveCounts {
    pub fn get(&self, id: HyperparamId) -> Option<&NodeCounts> {
        self.nodes.iter().find(|c| c.id == id)
    }
}

/// Effective leaf and node counts, accumulated from the deepest level up:
/// leaves get `v = m = 1`; otherwise `v_i = sum_j v_j / |parents(j)|` and
/// `m_i = 1 + sum_j m_j / |parents(j)|` over the children `j` of `i`.
pub fn effective_counts(graph: &ReliabilityGraph) -> EffectiveCounts {
    let mut values: BTreeMap<HyperparamId, (f64, f64)> = BTreeMap::new();
    for node in graph.nodes().iter().rev() {
        let children = graph.children(node.id);
        let entry = if children.is_empty() {
            (1.0, 1.0)
        } else {
            let (mut v, mut m) = (0.0, 1.0);
            for c in children {
                let share = graph.parents(*c).len() as f64;
                let (vc, mc) = values[c];
                v += vc / share;
                m += mc / share;
            }
            (v, m)
        };
        values.insert(node.id, entry);
    }
    EffectiveCounts {
        nodes: graph
            .nodes()
            .iter()
            .map(|n| {
                let (v, m) = values[&n.id];
                NodeCounts { id: n.id, v, m }
            })
            .collect(),
        leaves: graph.leaves().len(),
    }
}
