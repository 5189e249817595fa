use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QError {
    #[error("base q = {0} must satisfy 0 < q < 1")]
    InvalidBase(f64),
    #[error("pole: {what} vanishes at index {index}")]
    Pole { what: String, index: i64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence after {terms} terms")]
    NonConvergence { terms: usize },
    #[error("divergent series: {0}")]
    Divergent(String),
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("outside region of validity: {0}")]
    Region(String),
    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),
    #[error("genericity condition violated: {0}")]
    Genericity(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, QError>;
