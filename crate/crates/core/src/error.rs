use thiserror::Error;

use crate::metric::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point {point} out of range: space has {count} base points")]
    OutOfRange { point: Point, count: usize },
    #[error("invalid subset point {point}: {reason}")]
    BadSubset { point: Point, reason: String },
    #[error("subset point {point} used in a space without subset points")]
    SubsetInPlainSpace { point: Point },
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("demand {index}: {source}")]
    Demand { index: usize, source: MetricError },
    #[error("clusters: {0}")]
    Clusters(String),
    #[error("metric is invalid: {0}")]
    Metric(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("arrival order refers to demand {index}, but the instance has {count} demands")]
    BadOrder { index: usize, count: usize },
    #[error("opening rule {0} cannot be used with this algorithm")]
    WrongRule(&'static str),
    #[error("invalid opening rule: {0}")]
    BadRule(String),
}

#[derive(Debug, Error)]
pub enum ArrivalError {
    #[error("rho must lie strictly between 0 and 1, got {0}")]
    Rho(f64),
    #[error("partial random order needs clusters: {0}")]
    MissingClusters(String),
    #[error("unknown interleaver {0:?} (builtin: cluster-blocks, round-robin)")]
    UnknownInterleaver(String),
    #[error("invalid arrival model: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum OfflineError {
    #[error("no candidate facility locations")]
    NoCandidates,
    #[error("exact search over {candidates} candidates needs {subsets} subsets, above the budget of {limit}; use the analytic optimum instead")]
    BudgetExceeded {
        candidates: usize,
        subsets: u128,
        limit: u64,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Arrival(#[from] ArrivalError),
    #[error("{0} (try --opt analytic)")]
    Offline(#[from] OfflineError),
    #[error("no closed form for {0}")]
    NoClosedForm(String),
    #[error("unknown bound {0:?}")]
    UnknownBound(String),
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}
