use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid auto-correlation: {0}")]
    InvalidCorrelation(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error("degenerate rotation: impulse entry at index {index} is zero")]
    DegenerateRotation { index: usize },

    #[error("leading coefficient is zero; z-transform has fewer than N-1 finite zeros")]
    LeadingZero,

    #[error("solver diverged after {iters} iterations: {reason}")]
    Divergence { iters: usize, reason: String },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error(
        "lambda bracket exhausted; nearest miss lambda = {lambda:.6e} with eigenvalue ratio {rank_ratio:.3e} and fit {fit:.6e} against lower bound {lower_bound:.6e}"
    )]
    BracketExhausted {
        lambda: f64,
        rank_ratio: f64,
        fit: f64,
        lower_bound: f64,
    },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
