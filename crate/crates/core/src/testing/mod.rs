//! FDR-controlling multiple testing procedures.

mod bh;
mod dagger;
mod fst;

pub use bh::{run_bh, BhOutcome, BhTrace};
pub use dagger::{
    by_reshape, dagger_stepup, dagger_threshold, harmonic, run_dagger, DaggerLevel,
    DaggerOutcome, DaggerTrace, Reshape, TestDecision,
};
pub use fst::{default_k, fst_thresholds, run_fst, FstConfig, FstOutcome, FstStep, FstTrace};
