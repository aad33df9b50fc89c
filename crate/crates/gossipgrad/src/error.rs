use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("topology generation failed after {attempts} attempts: {reason}")]
    TopologyGeneration { attempts: usize, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("problem generation failed: {0}")]
    Generation(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("divergence at iteration {iteration}: norm {norm:.3e}")]
    Divergence { iteration: usize, norm: f64 },

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),
}
