//! DOT and JSON renderings of a reliability graph. Both are produced from the
//! same [`GraphExport`] record, so they always carry identical content.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{EffectiveCounts, ReliabilityGraph};
use crate::risk::HyperparamId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    pub id: HyperparamId,
    pub label: String,
    pub depth: usize,
    pub score: Option<f64>,
    pub pvalue: Option<f64>,
    pub v: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub depths: usize,
    pub leaves: usize,
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<(HyperparamId, HyperparamId)>,
}

impl GraphExport {
    pub fn new(
        graph: &ReliabilityGraph,
        counts: &EffectiveCounts,
        pvalues: Option<&[(HyperparamId, f64)]>,
    ) -> Self {
        let pvalue_of = |h: HyperparamId| {
            pvalues.and_then(|ps| ps.iter().find(|(id, _)| *id == h).map(|(_, p)| *p))
        };
        let nodes = graph
            .nodes()
            .iter()
            .map(|n| {
                let c = counts.get(n.id);
                ExportNode {
                    id: n.id,
                    label: n.label.clone(),
                    depth: n.depth,
                    score: n.score,
                    pvalue: pvalue_of(n.id),
                    v: c.map_or(1.0, |c| c.v),
                    m: c.map_or(1.0, |c| c.m),
                }
            })
            .collect();
        Self {
            depths: graph.depth_count(),
            leaves: counts.leaves,
            nodes,
            edges: graph.edges(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn render_dot(export: &GraphExport) -> String {
    let mut out = String::from("digraph reliability_graph {\n");
    if !export.nodes.is_empty() {
        out.push_str("  rankdir=TB;\n  node [shape=box];\n");
    }
    for n in &export.nodes {
        let mut label = format!("{}\\ndepth={}", escape(&n.label), n.depth);
        if let Some(s) = n.score {
            write!(label, "\\nscore={s}").unwrap();
        }
        if let Some(p) = n.pvalue {
            write!(label, "\\np={p}").unwrap();
        }
        write!(label, "\\nv={} m={}", n.v, n.m).unwrap();
        writeln!(out, "  n{} [label=\"{label}\"];", n.id).unwrap();
    }
    for d in 1..=export.depths {
        let members: Vec<String> = export
            .nodes
            .iter()
            .filter(|n| n.depth == d)
            .map(|n| format!("n{}", n.id))
            .collect();
        writeln!(out, "  {{ rank=same; {}; }}", members.join("; ")).unwrap();
    }
    for (from, to) in &export.edges {
        writeln!(out, "  n{from} -> n{to};").unwrap();
    }
    out.push_str("}\n");
    out
}

pub fn to_dot(
    graph: &ReliabilityGraph,
    counts: &EffectiveCounts,
    pvalues: Option<&[(HyperparamId, f64)]>,
) -> String {
    render_dot(&GraphExport::new(graph, counts, pvalues))
}

pub fn render_json(export: &GraphExport) -> String {
    let mut s = serde_json::to_string_pretty(export).expect("graph export serialises");
    s.push('\n');
    s
}

pub fn to_json(
    graph: &ReliabilityGraph,
    counts: &EffectiveCounts,
    pvalues: Option<&[(HyperparamId, f64)]>,
) -> String {
    render_json(&GraphExport::new(graph, counts, pvalues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::effective_counts;
    use crate::graph::tests::node;

    #[test]
    fn empty_graph() {
        let g = ReliabilityGraph::empty();
        let dot = to_dot(&g, &effective_counts(&g), None);
        assert_eq!(dot, "digraph reliability_graph {\n}\n");
        let json: GraphExport = serde_json::from_str(&to_json(&g, &effective_counts(&g), None)).unwrap();
        assert!(json.nodes.is_empty());
    }

    #[test]
    fn chain_edges_and_determinism() {
        let g = ReliabilityGraph::new(vec![node(0, 1, &[]), node(1, 2, &[0]), node(2, 3, &[1])])
            .unwrap();
        let c = effective_counts(&g);
        let p = [(HyperparamId(0), 0.01), (HyperparamId(2), 0.5)];
        let dot = to_dot(&g, &c, Some(&p));
        assert_eq!(dot.matches("->").count(), 2);
        assert!(dot.contains("n0 -> n1;"));
        assert!(dot.contains("p=0.01"));
        assert!(dot.contains("v=1 m=3"));
        assert_eq!(dot, to_dot(&g, &c, Some(&p)));
        let json = to_json(&g, &c, Some(&p));
        assert_eq!(json, to_json(&g, &c, Some(&p)));
        let parsed: GraphExport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.edges.len(), 2);
        assert_eq!(render_dot(&parsed), dot);
    }

    #[test]
    fn escapes_labels() {
        let mut n = node(0, 1, &[]);
        n.label = "a \"quoted\" \\ label".into();
        let g = ReliabilityGraph::new(vec![n]).unwrap();
        let dot = to_dot(&g, &effective_counts(&g), None);
        assert!(dot.contains(r#"a \"quoted\" \\ label"#));
    }
}
