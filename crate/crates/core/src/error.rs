use thiserror::Error;

/// Errors produced by graph construction, solvers and affinity queries.
#[derive(Debug, Error)]
pub enum AffinityError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("edge ({u}, {v}) has invalid weight {w}")]
    InvalidWeight { u: usize, v: usize, w: f64 },

    #[error("node id {id} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { id: usize, num_nodes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("nodes {u} and {v} lie in different components (infinite resistance)")]
    CrossComponent { u: usize, v: usize },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("sketch row {row}: {source}")]
    SketchRow {
        row: usize,
        #[source]
        source: Box<AffinityError>,
    },

    #[error("graph has {n} nodes, above the dense cap of {cap}")]
    AboveOracleCap { n: usize, cap: usize },

    #[error("pseudoinverse rank check failed: {zeroed} eigenvalues below cutoff but {components} components")]
    RankMismatch { zeroed: usize, components: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    WrongEmbeddingKind(&'static str),

    #[error("resistance table incomplete: {0}")]
    IncompleteTable(String),

    #[error("no embedding families present in feature set")]
    NoEmbeddingFamilies,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("cubic graph search: {0}")]
    CubicSearch(String),

    #[error("invalid format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AffinityError {
    /// True when the error (or its cause) is a solver convergence failure.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            AffinityError::NonConvergence { .. } => true,
            AffinityError::SketchRow { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, AffinityError>;
