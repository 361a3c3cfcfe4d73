use serde::{Deserialize, Serialize};

use crate::risk::HyperparamId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhTrace {
    pub delta: f64,
    pub tested: usize,
    pub rejections: usize,
    /// `rejections * delta / tested`; every discovery has p at or below it.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BhOutcome {
    /// Discoveries in ascending id order.
    pub discovered: Vec<HyperparamId>,
    pub trace: BhTrace,
}

/// Benjamini-Hochberg step-up: find the largest `i` with `p_(i) <= i delta / n`
/// and reject every hypothesis with `p <= p_(i)`.
pub fn run_bh(pvalues: &[(HyperparamId, f64)], delta: f64) -> BhOutcome {
    let n = pvalues.len();
    let mut sorted: Vec<(HyperparamId, f64)> = pvalues.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let cutoff = (1..=n)
        .rev()
        .find(|&i| sorted[i - 1].1 <= i as f64 * delta / n as f64);
    let (discovered, rejections, threshold) = match cutoff {
        Some(i) => {
            let p_cut = sorted[i - 1].1;
            let mut d: Vec<HyperparamId> = sorted
                .iter()
                .filter(|(_, p)| *p <= p_cut)
                .map(|(h, _)| *h)
                .collect();
            d.sort_unstable();
            (d, i, i as f64 * delta / n as f64)
        }
        None => (Vec::new(), 0, 0.0),
    };
    BhOutcome {
        discovered,
        trace: BhTrace {
            delta,
            tested: n,
            rejections,
            threshold,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tagged(ps: &[f64]) -> Vec<(HyperparamId, f64)> {
        ps.iter().enumerate().map(|(i, &p)| (HyperparamId(i), p)).collect()
    }

    #[test]
    fn textbook_example() {
        let out = run_bh(&tagged(&[0.01, 0.04, 0.2]), 0.1);
        assert_eq!(out.discovered, vec![HyperparamId(0), HyperparamId(1)]);
    }

    #[test]
    fn all_ones() {
        assert!(run_bh(&tagged(&[1.0; 6]), 0.1).discovered.is_empty());
    }

    #[test]
    fn boundary_is_inclusive() {
        assert_eq!(run_bh(&tagged(&[0.1]), 0.1).discovered, vec![HyperparamId(0)]);
    }

    #[test]
    fn empty_input() {
        assert!(run_bh(&[], 0.1).discovered.is_empty());
    }

    proptest! {
        #[test]
        fn monotone_in_delta(ps in proptest::collection::vec(0.0f64..=1.0, 0..40), d1 in 0.001f64..0.5, d2 in 0.001f64..0.5) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let t = tagged(&ps);
            prop_assert!(run_bh(&t, lo).discovered.len() <= run_bh(&t, hi).discovered.len());
        }

        #[test]
        fn discoveries_under_recorded_threshold(ps in proptest::collection::vec(0.0f64..=0.2, 1..40)) {
            let t = tagged(&ps);
            let out = run_bh(&t, 0.1);
            for h in &out.discovered {
                prop_assert!(ps[h.0] <= out.trace.threshold);
            }
        }
    }
}
