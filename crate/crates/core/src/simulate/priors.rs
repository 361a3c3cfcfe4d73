use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SyntheticSpec;
use crate::error::{Error, Result};
use crate::ranking::PriorSpec;

/// Swaps `eta_ij` and `eta_ji` independently for each unordered pair with
/// probability `fraction`.
pub fn corrupt_priors(prior: &PriorSpec, fraction: f64, seed: u64) -> Result<PriorSpec> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::BadFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(prior.swap_pairs(|_, _| rng.random_bool(fraction)))
}

/// Prior built from the true means, oriented like the data term: `eta_ij = 1`
/// when `i` has the larger worst-case excess over its targets, `0` when it has
/// the smaller one and `0.5` on ties.
pub fn oracle_prior(spec: &SyntheticSpec, alphas: &[f64], pseudocount: f64) -> Result<PriorSpec> {
    if alphas.len() != spec.n_constrained() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} constrained risks",
            alphas.len(),
            spec.n_constrained()
        )));
    }
    let excess: Vec<f64> = spec
        .true_means
        .iter()
        .map(|row| {
            row.iter()
                .zip(alphas)
                .map(|(m, a)| m - a)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let eta = excess
        .iter()
        .map(|a| {
            excess
                .iter()
                .map(|b| match a.total_cmp(b) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => 0.5,
                })
                .collect()
        })
        .collect();
    PriorSpec::new(eta, pseudocount)
}
