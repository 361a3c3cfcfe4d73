//! Multi-objective hyperparameter selection with false discovery rate
//! control over a learned reliability graph.

pub mod error;
pub mod formats;
pub mod graph;
pub mod pareto;
pub mod pipeline;
pub mod ranking;
pub mod risk;
pub mod simulate;
pub mod testing;

pub use error::{Error, Result};
pub use pipeline::{run, Method, MethodConfig, SelectionReport};
pub use risk::{validate_risk_table, HyperparamId, RiskTable, SelectionProblem};
