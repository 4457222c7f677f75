//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must have at least one vertex")]
    EmptyGraph,

    #[error("edge probability {value} at pair ({i}, {j}) is outside [0, 1]")]
    EdgeProbabilityOutOfRange { i: usize, j: usize, value: f64 },

    #[error("require n >= K, got n = {n} and K = {k}")]
    TooFewVertices { n: usize, k: usize },

    #[error("assignment label {label} at vertex {vertex} is outside [0, {k})")]
    AssignmentOutOfRange { vertex: usize, label: usize, k: usize },

    #[error("invalid block model specification: {0}")]
    InvalidSbmSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("embedding dimension d = {d} exceeds vertex count n = {n}")]
    DimensionTooLarge { d: usize, n: usize },

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_deviation:e})")]
    NotSymmetric { max_deviation: f64 },

    #[error("matrix shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("vertex {vertex} is isolated (zero degree)")]
    IsolatedVertex { vertex: usize },

    #[error("nonpositive row sum at vertex {vertex}")]
    NonPositiveRowSum { vertex: usize },

    #[error("nonpositive normalizer at vertex {vertex}")]
    NonPositiveNormalizer { vertex: usize },

    #[error("eigensolver failed to converge")]
    EigenDidNotConverge,

    #[error("matrix is not positive definite{}", vertex_suffix(.vertex))]
    NotPositiveDefinite { vertex: Option<usize> },

    #[error(
        "condition number {cond:e} exceeds limit {limit:e}{}",
        vertex_suffix(.vertex)
    )]
    IllConditioned {
        cond: f64,
        limit: f64,
        vertex: Option<usize>,
    },

    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },

    #[error("single-vertex likelihood maximization did not converge after {iterations} iterations")]
    MleDidNotConverge { iterations: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

fn vertex_suffix(vertex: &Option<usize>) -> String {
    match vertex {
        Some(v) => format!(" (vertex {v})"),
        None => String::new(),
    }
}
