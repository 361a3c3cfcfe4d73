use super::lasso::{nonneg_lasso, LassoProblem};
use super::{GraphNode, ReliabilityGraph};
use crate::error::Result;
use crate::ranking::DepthAssignment;
use crate::risk::{HyperparamId, SubsetView};

pub const DEFAULT_TAU: f64 = 0.1;

/// Per-sample constrained-risk vector of `h`, flattened sample-major.
fn regression_vector(view: &SubsetView<'_>, h: HyperparamId) -> Vec<f64> {
    let lc = view.calibration().n_constrained();
    let mut out = Vec::with_capacity(view.len() * lc);
    for k in 0..view.len() {
        for l in 0..lc {
            out.push(view.loss(k, h, l));
        }
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa > 0.0 && sbb > 0.0 {
        Some(sab / (saa * sbb).sqrt())
    } else {
        None
    }
}

/// Parent for a node whose lasso selected nothing: the candidate with the
/// highest Pearson correlation, lowest index on ties, and the lowest-index
/// candidate when no correlation is defined.
fn fallback_parent(target: &[f64], candidates: &[(HyperparamId, Vec<f64>)]) -> HyperparamId {
    let mut best: Option<(f64, HyperparamId)> = None;
    for (id, feature) in candidates {
        if let Some(r) = pearson(target, feature) {
            if best.is_none_or(|(b, _)| r > b) {
                best = Some((r, *id));
            }
        }
    }
    best.map_or(candidates[0].0, |(_, id)| id)
}

/// Builds the reliability graph on the optimisation split: each node at
/// depth `d >= 2` takes as parents the depth-`(d-1)` nodes with positive
/// non-negative lasso coefficients, using constrained risks only.
pub fn learn_edges(
    opt: &SubsetView<'_>,
    depths: &DepthAssignment,
    tau: f64,
    scores: Option<&[(HyperparamId, f64)]>,
) -> Result<ReliabilityGraph> {
    let table = opt.table();
    let score_of = |h: HyperparamId| -> Option<f64> {
        scores.and_then(|s| s.iter().find(|(id, _)| *id == h).map(|(_, v)| *v))
    };
    let mut nodes = Vec::new();
    let mut previous: Vec<(HyperparamId, Vec<f64>)> = Vec::new();
    for (level, cluster) in depths.clusters.iter().enumerate() {
        let depth = level + 1;
        let mut current = Vec::with_capacity(cluster.len());
        let mut ids = cluster.clone();
        ids.sort_unstable();
        for h in ids {
            let target = regression_vector(opt, h);
            let parents = if depth == 1 {
                Vec::new()
            } else {
                let problem = LassoProblem {
                    targets: target.clone(),
                    features: previous.iter().map(|(_, f)| f.clone()).collect(),
                };
                let solution = nonneg_lasso(&problem, tau)?;
                if solution.active_set.is_empty() {
                    vec![fallback_parent(&target, &previous)]
                } else {
                    solution.active_set.iter().map(|&k| previous[k].0).collect()
                }
            };
            nodes.push(GraphNode {
                id: h,
                label: table.label(h).to_string(),
                depth,
                score: score_of(h),
                parents,
            });
            current.push((h, target));
        }
        previous = current;
    }
    ReliabilityGraph::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::effective_counts;
    use crate::risk::{validate_risk_table, Calibration, RiskTable, SelectionProblem};

    fn calibration(columns: &[Vec<f64>]) -> Calibration {
        let n = columns[0].len();
        let t = RiskTable::from_fn(n, columns.len(), 1, |z, h, _| columns[h][z]).unwrap();
        validate_risk_table(t, SelectionProblem::new(vec![0.5], 0.1)).unwrap()
    }

    fn levels(levels: &[&[usize]]) -> DepthAssignment {
        DepthAssignment {
            clusters: levels
                .iter()
                .map(|l| l.iter().map(|&h| HyperparamId(h)).collect())
                .collect(),
        }
    }

    #[test]
    fn copy_of_parent_gets_single_edge() {
        let a = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let b = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let cal = calibration(&[a.clone(), b, a]);
        let g = learn_edges(&cal.full_view(), &levels(&[&[0, 1], &[2]]), 0.1, None).unwrap();
        assert_eq!(g.parents(HyperparamId(2)), &[HyperparamId(0)]);
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn single_level_has_no_edges() {
        let cal = calibration(&[vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]]);
        let g = learn_edges(&cal.full_view(), &levels(&[&[0, 1, 2]]), 0.1, None).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(effective_counts(&g).leaves, 3);
    }

    #[test]
    fn huge_penalty_uses_correlation_fallback() {
        let child = vec![0.0, 1.0, 1.0, 0.0, 1.0];
        let weak = vec![1.0, 0.0, 1.0, 0.0, 0.0];
        let strong = vec![0.0, 1.0, 1.0, 0.0, 0.0];
        let cal = calibration(&[weak, strong, child]);
        let g = learn_edges(&cal.full_view(), &levels(&[&[0, 1], &[2]]), 1e6, None).unwrap();
        assert_eq!(g.parents(HyperparamId(2)), &[HyperparamId(1)]);
    }

    #[test]
    fn undefined_correlation_falls_back_to_lowest_index() {
        let constant = vec![0.0; 4];
        let cal = calibration(&[constant.clone(), constant.clone(), constant]);
        let g = learn_edges(&cal.full_view(), &levels(&[&[1, 0], &[2]]), 0.1, None).unwrap();
        assert_eq!(g.parents(HyperparamId(2)), &[HyperparamId(0)]);
    }

    #[test]
    fn carries_scores_and_labels() {
        let cal = calibration(&[vec![0.1], vec![0.2]]);
        let scores = [(HyperparamId(0), 0.3), (HyperparamId(1), 0.7)];
        let g = learn_edges(&cal.full_view(), &levels(&[&[0], &[1]]), 0.1, Some(&scores)).unwrap();
        assert_eq!(g.node(HyperparamId(1)).unwrap().score, Some(0.7));
        assert_eq!(g.node(HyperparamId(1)).unwrap().label, "h1");
    }
}
