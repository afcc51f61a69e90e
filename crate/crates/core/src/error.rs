use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate gradient: |xi| = {magnitude:e} is below the floor")]
    DegenerateGradient { magnitude: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("node {node} has nonpositive value {value:e}")]
    NonPositiveValue { node: usize, value: f64 },
    #[error("candidate differs from the reference field outside the support set at node {node}")]
    OutsideSupport { node: usize },
    #[error("level set is not closed")]
    OpenLevelSet,
    #[error("every contour vertex is masked")]
    AllMasked,
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("solver did not converge for p = {p} after {iterations} iterations")]
    NotConverged { p: f64, iterations: usize },
}
