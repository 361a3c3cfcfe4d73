//! Pareto front estimation over empirical risks and the final pick among
//! discovered hyperparameters.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{HyperparamId, SubsetView};

/// True iff `a` is no worse than `b` everywhere and strictly better somewhere.
/// All coordinates are losses (lower is better).
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

/// Strategy for picking non-dominated points out of a candidate set.
pub trait FrontEstimator {
    /// Positions (into `vectors`) of the estimated front, ascending.
    fn front(&self, vectors: &[Vec<f64>]) -> Vec<usize>;
}

/// Exact O(n²) pairwise dominance filter.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactFront;

impl FrontEstimator for ExactFront {
    fn front(&self, vectors: &[Vec<f64>]) -> Vec<usize> {
        (0..vectors.len())
            .filter(|&i| {
                !vectors
                    .iter()
                    .enumerate()
                    .any(|(j, v)| j != i && dominates_unchecked(v, &vectors[i]))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<HyperparamId>,
    pub risk_vectors: Vec<Vec<f64>>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Non-dominated hyperparameters under all empirical risks of `view`.
/// Points that tie in every coordinate are all kept.
pub fn pareto_front(view: &SubsetView<'_>) -> ParetoFront {
    pareto_front_with(view, &ExactFront)
}

pub fn pareto_front_with(view: &SubsetView<'_>, estimator: &dyn FrontEstimator) -> ParetoFront {
    let ids: Vec<HyperparamId> = view.table().hyperparams().collect();
    let vectors: Vec<Vec<f64>> = ids.iter().map(|&h| view.risk_vector(h)).collect();
    let keep = estimator.front(&vectors);
    ParetoFront {
        members: keep.iter().map(|&i| ids[i]).collect(),
        risk_vectors: keep.iter().map(|&i| vectors[i].clone()).collect(),
    }
}

/// Picks among `discovered` using the auxiliary (unconstrained) risks of
/// `estimates`.
///
/// With one auxiliary risk the result is the single argmin (lowest index on
/// ties). With several, the Pareto subset under the auxiliary risks is
/// returned, ordered by the weighted sum when `weights` is given and by index
/// otherwise. Without auxiliary risks the discovered set is returned in index
/// order.
pub fn final_selection(
    discovered: &[HyperparamId],
    estimates: &SubsetView<'_>,
    weights: Option<&[f64]>,
) -> Result<Vec<HyperparamId>> {
    let lc = estimates.calibration().n_constrained();
    let n_aux = estimates.table().n_risks() - lc;
    if let Some(w) = weights {
        if w.len() != n_aux {
            return Err(Error::BadWeights(format!(
                "{} weights for {n_aux} auxiliary risks",
                w.len()
            )));
        }
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::BadWeights(format!("weight {bad} is not a non-negative number")));
        }
    }
    let mut ids = discovered.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() || n_aux == 0 {
        return Ok(ids);
    }
    let aux: Vec<Vec<f64>> = ids
        .iter()
        .map(|&h| (lc..lc + n_aux).map(|l| estimates.empirical_risk(h, l)).collect())
        .collect();

    if n_aux == 1 {
        let best = (0..ids.len())
            .min_by(|&a, &b| aux[a][0].total_cmp(&aux[b][0]).then(a.cmp(&b)))
            .expect("non-empty");
        return Ok(vec![ids[best]]);
    }

    let mut front = ExactFront.front(&aux);
    if let Some(w) = weights {
        let score = |i: usize| -> f64 { aux[i].iter().zip(w).map(|(r, w)| r * w).sum() };
        front.sort_by(|&a, &b| {
            score(a)
                .partial_cmp(&score(b))
                .unwrap_or(Ordering::Equal)
                .then(ids[a].cmp(&ids[b]))
        });
    }
    Ok(front.into_iter().map(|i| ids[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{validate_risk_table, Calibration, RiskTable, SelectionProblem};
    use proptest::prelude::*;

    /// One sample per table so empirical risks equal the given vectors.
    fn calibration(vectors: &[Vec<f64>], n_constrained: usize) -> Calibration {
        let nr = vectors[0].len();
        let t = RiskTable::from_fn(1, vectors.len(), nr, |_, h, l| vectors[h][l]).unwrap();
        validate_risk_table(t, SelectionProblem::new(vec![0.5; n_constrained], 0.1)).unwrap()
    }

    fn brute_force_front(vectors: &[Vec<f64>]) -> Vec<usize> {
        let mut out = Vec::new();
        'outer: for i in 0..vectors.len() {
            for j in 0..vectors.len() {
                if i == j {
                    continue;
                }
                let le = vectors[j].iter().zip(&vectors[i]).all(|(a, b)| a <= b);
                let lt = vectors[j].iter().zip(&vectors[i]).any(|(a, b)| a < b);
                if le && lt {
                    continue 'outer;
                }
            }
            out.push(i);
        }
        out
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[0.2, 0.2], &[0.3, 0.3]).unwrap());
        assert!(!dominates(&[0.2, 0.2], &[0.2, 0.2]).unwrap());
        assert!(!dominates(&[0.1, 0.9], &[0.9, 0.1]).unwrap());
        assert_eq!(dominates(&[0.1], &[0.1, 0.2]), Err(Error::LengthMismatch(1, 2)));
    }

    #[test]
    fn front_examples() {
        let v = vec![vec![0.1, 0.9], vec![0.2, 0.2], vec![0.9, 0.1]];
        let cal = calibration(&v, 1);
        let front = pareto_front(&cal.full_view());
        assert_eq!(front.members, vec![HyperparamId(0), HyperparamId(1), HyperparamId(2)]);

        let mut v2 = v.clone();
        v2.push(vec![0.3, 0.3]);
        let cal = calibration(&v2, 1);
        assert_eq!(pareto_front(&cal.full_view()).members.len(), 3);

        let cal = calibration(&[vec![0.4, 0.4]], 1);
        assert_eq!(pareto_front(&cal.full_view()).members, vec![HyperparamId(0)]);
    }

    #[test]
    fn duplicates_are_kept() {
        let cal = calibration(&[vec![0.2, 0.2], vec![0.2, 0.2], vec![0.5, 0.5]], 1);
        assert_eq!(
            pareto_front(&cal.full_view()).members,
            vec![HyperparamId(0), HyperparamId(1)]
        );
    }

    #[test]
    fn final_single_aux_argmin() {
        let cal = calibration(&[vec![0.1, 0.5], vec![0.1, 0.3], vec![0.1, 0.3]], 1);
        let ids = [HyperparamId(0), HyperparamId(1), HyperparamId(2)];
        assert_eq!(final_selection(&ids, &cal.full_view(), None).unwrap(), vec![HyperparamId(1)]);
        assert!(final_selection(&[], &cal.full_view(), None).unwrap().is_empty());
    }

    #[test]
    fn final_weighted_ranking() {
        let cal = calibration(&[vec![0.1, 0.9, 0.1], vec![0.1, 0.1, 0.9]], 1);
        let ids = [HyperparamId(0), HyperparamId(1)];
        let view = cal.full_view();
        // weighted sums: h0 -> 0.9, h1 -> 0.1 under (1, 0)
        assert_eq!(
            final_selection(&ids, &view, Some(&[1.0, 0.0])).unwrap(),
            vec![HyperparamId(1), HyperparamId(0)]
        );
        assert_eq!(
            final_selection(&ids, &view, Some(&[0.0, 1.0])).unwrap(),
            vec![HyperparamId(0), HyperparamId(1)]
        );
        assert!(matches!(
            final_selection(&ids, &view, Some(&[1.0])),
            Err(Error::BadWeights(_))
        ));
        assert!(matches!(
            final_selection(&ids, &view, Some(&[1.0, -1.0])),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn final_drops_dominated_under_aux() {
        let cal = calibration(&[vec![0.1, 0.2, 0.2], vec![0.1, 0.3, 0.3], vec![0.1, 0.1, 0.9]], 1);
        let ids = [HyperparamId(0), HyperparamId(1), HyperparamId(2)];
        assert_eq!(
            final_selection(&ids, &cal.full_view(), None).unwrap(),
            vec![HyperparamId(0), HyperparamId(2)]
        );
    }

    fn vectors_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=4).prop_flat_map(|l| {
            proptest::collection::vec(
                proptest::collection::vec((0u8..=10).prop_map(|x| x as f64 / 10.0), l),
                1..=200,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exact_front_matches_brute_force(vectors in vectors_strategy()) {
            prop_assert_eq!(ExactFront.front(&vectors), brute_force_front(&vectors));
        }

        #[test]
        fn dominated_point_does_not_change_front(vectors in vectors_strategy(), pick in any::<prop::sample::Index>(), bump in 0.05f64..0.5) {
            let before = ExactFront.front(&vectors);
            let base = &vectors[before[pick.index(before.len())]];
            let worse: Vec<f64> = base.iter().map(|x| (x + bump).min(1.0)).collect();
            prop_assume!(dominates(base, &worse).unwrap());
            let mut extended = vectors.clone();
            extended.push(worse);
            let after = ExactFront.front(&extended);
            prop_assert_eq!(before, after);
        }

        #[test]
        fn final_is_subset(vectors in proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, 3), 1..20), mask in any::<u32>()) {
            let cal = calibration(&vectors, 1);
            let ids: Vec<HyperparamId> = (0..vectors.len()).filter(|i| mask >> i & 1 == 1).map(HyperparamId).collect();
            let out = final_selection(&ids, &cal.full_view(), None).unwrap();
            prop_assert!(out.iter().all(|h| ids.contains(h)));
            prop_assert_eq!(out.is_empty(), ids.is_empty());
        }
    }
}
