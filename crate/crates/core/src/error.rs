use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("cluster size {d} does not divide {n}")]
    Divisibility { n: usize, d: usize },
    #[error("invalid graph parameter: {0}")]
    InvalidParameter(String),
    #[error("edge ({queue}, {server}) out of range for a {n_queues}x{n_servers} graph")]
    EdgeOutOfRange {
        queue: usize,
        server: usize,
        n_queues: usize,
        n_servers: usize,
    },
    #[error("duplicate edge ({queue}, {server})")]
    DuplicateEdge { queue: usize, server: usize },
    #[error("graph with {n} left nodes is too large for exact verification (limit {limit})")]
    TooLargeForExactVerification { n: usize, limit: usize },
    #[error("failed to generate a random regular graph after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("graph file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("rate vector has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid rate {value} at index {index}")]
    InvalidRate { index: usize, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{n} queues is too many for exhaustive enumeration (limit {limit})")]
    TooLarge { n: usize, limit: usize },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("rates file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0} is outside the formula's domain")]
    Domain(String),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("queue {0} has no connected server")]
    IsolatedQueue(usize),
    #[error("stage-1 cluster flow is infeasible: queue clusters {clusters:?} demand {demand:.6} but can reach capacity {capacity:.6}")]
    InfeasibleClusterFlow {
        clusters: Vec<usize>,
        demand: f64,
        capacity: f64,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Errors raised by the experiment layer: config problems are reported
/// separately so front ends can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_) | ExperimentError::Sim(SimError::Config(_))
        )
    }
}

impl From<TopologyError> for ExperimentError {
    fn from(e: TopologyError) -> Self {
        ExperimentError::Sim(SimError::Topology(e))
    }
}

impl From<CapacityError> for ExperimentError {
    fn from(e: CapacityError) -> Self {
        ExperimentError::Sim(SimError::Capacity(e))
    }
}
