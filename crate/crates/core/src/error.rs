use thiserror::Error;

/// Errors produced by the segmentation, gradient and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice dimensions {height}x{width}: both must be at least 1")]
    InvalidDimensions { height: usize, width: usize },

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("edge {edge} has invalid weight {value} (weights must be finite and non-negative)")]
    InvalidWeight { edge: usize, value: f64 },

    #[error("invalid seeds: {0}")]
    InvalidSeeds(String),

    /// A connected component of the weighted graph contains no seed, so the
    /// unmarked Laplacian block is singular.
    #[error("singular system: vertex {vertex} (row {row}, col {col}) is not connected to any seed")]
    SingularSystem { vertex: usize, row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("conjugate gradients did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
