//! Error type shared by every module.

use serde::Serialize;
use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Error {
    /// Malformed input: empty vectors, out-of-range indices, dimension mismatch.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A stated precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Two eigenvalues are closer than the requested gap.
    #[error("degenerate spectrum: eigenvalues {q} and {k} are within {gap:e}")]
    DegenerateSpectrum { q: usize, k: usize, gap: f64 },
    /// The modified Hessian leaves the cone at a grid node.
    #[error("not admissible at node {node}: lambda = {lambda:?}")]
    Admissibility { node: usize, lambda: Vec<f64> },
    /// The subsolution construction could not be completed.
    #[error("construction failed at node {node}: {reason}")]
    Construction { node: usize, reason: String },
    /// A bracketed search ran out of bracket.
    #[error("search failed: {0}")]
    Search(String),
    /// An iterative method stopped before reaching its tolerance.
    #[error("no convergence after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },
    /// Reading or parsing external data failed.
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
