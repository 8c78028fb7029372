use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    #[error("mesh quality: triangle {cell}: {reason}")]
    MeshQuality { cell: usize, reason: String },

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:.3e})")]
    Solver {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("eigen iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    Eigen { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("point ({0}, {1}) is outside the mesh")]
    Location(f64, f64),

    #[error("domain is not mean-convex; curvature <= 0 on {ranges:?}")]
    MeanConvexity { ranges: Vec<(f64, f64)> },

    #[error("fit: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
