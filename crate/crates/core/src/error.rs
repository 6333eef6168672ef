use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field shape mismatch: expected {expected} samples, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("tensor at cell {cell} is not admissible: eigenvalues ({lo:.3e}, {hi:.3e})")]
    NotPositiveDefinite { cell: usize, lo: f64, hi: f64 },

    #[error("{what}: value {value:.6e} violates bound {bound:.6e}")]
    BoundViolated {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e}, contraction estimate {contraction:.3})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        contraction: f64,
    },

    #[error("non-positive Jacobian {jacobian:.3e} at {location}")]
    Degenerate { location: String, jacobian: f64 },

    #[error("point {point} lies outside the sampled range of the map")]
    OutOfRange { point: String },

    #[error("boundary map is not monotone: {0}")]
    NotMonotone(String),

    #[error("mesh: {0}")]
    Mesh(String),

    #[error("mode cutoff {modes} is too large for {available} boundary samples")]
    TooManyModes { modes: usize, available: usize },

    #[error("linear system is singular or ill-conditioned: {0}")]
    Singular(String),

    #[error("logarithm branch ambiguity: {0}")]
    Branch(String),

    #[error("trace mismatch {defect:.3e} exceeds tolerance {tol:.3e}")]
    TraceMismatch { defect: f64, tol: f64 },

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
