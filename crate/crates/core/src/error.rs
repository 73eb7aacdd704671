use thiserror::Error;

pub type Result<T> = std::result::Result<T, QnsError>;

#[derive(Debug, Error)]
pub enum QnsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("inconsistent system: {0}")]
    Consistency(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("post-selection failed: outcome probability {0:e}")]
    PostSelection(f64),
    #[error("ill-conditioned Gram matrix (condition number {0:e})")]
    IllConditioned(f64),
    #[error("instability at step {step}: {what}")]
    Instability { step: usize, what: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("out of scope: {0}")]
    Scope(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("singular matrix")]
    Singular,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
