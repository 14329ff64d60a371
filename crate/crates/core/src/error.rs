use thiserror::Error;

/// Errors raised by graph construction, discretization and the spectral solvers.
#[derive(Debug, Error)]
pub enum QgError {
    #[error("nonpositive length {length} on edge {edge}")]
    NonpositiveLength { edge: String, length: f64 },
    #[error("non-finite length on edge {0}")]
    NonFiniteLength(String),
    #[error("edge {edge} references unknown vertex {vertex}")]
    DanglingVertex { edge: String, vertex: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("graph has no vertices")]
    Empty,
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("unsupported family {0}")]
    UnsupportedFamily(String),
    #[error("invalid surgery: {0}")]
    Surgery(String),
    #[error("not a tree: {0}")]
    NotATree(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("requested {requested} eigenvalues but only {available} degrees of freedom are free")]
    TooManyEigenvalues { requested: usize, available: usize },
    #[error("dof cap {cap} is below the minimum mesh size {minimum}")]
    DofCap { cap: usize, minimum: usize },
    #[error("suspected missed root: found {found} eigenvalues below k = {k}, admissible range [{lower}, {upper}]")]
    MissedRoot { found: usize, k: f64, lower: usize, upper: usize },
    #[error("mismatched spectra: {0}")]
    Mismatch(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, QgError>;
