use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("risk value {value} at sample {sample}, hyperparameter {hyperparam}, risk {risk} is outside [0, 1]")]
    OutOfRangeRisk {
        sample: usize,
        hyperparam: usize,
        risk: usize,
        value: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("splitting {n_samples} samples at fraction {fraction} leaves one side empty")]
    TooFewSamples { n_samples: usize, fraction: f64 },
    #[error("empirical risk requested over an empty sample subset")]
    EmptySubset,
    #[error("combined p-value requested for an empty vector")]
    EmptyVector,
    #[error("risk vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("bad scalarization weights: {0}")]
    BadWeights(String),
    #[error("prior matrix is {found}x{found}, expected {expected}x{expected}")]
    PriorShapeMismatch { expected: usize, found: usize },
    #[error("invalid prior: {0}")]
    BadPrior(String),
    #[error("non-negative lasso called with no candidate parents")]
    NoFeatures,
    #[error("invalid reliability graph: {0}")]
    InvalidGraph(String),
    #[error("FST stopping budget k = {k} outside [1, {n}]")]
    BadK { k: usize, n: usize },
    #[error("corruption fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("oracle is limited to {max} nodes, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
}
