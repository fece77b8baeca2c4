use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid target entropy {0} bits (must lie in (0, {1}])")]
    InvalidTarget(f64, f64),
    #[error("invalid filter length {0}: must be odd and non-zero")]
    InvalidLength(usize),
    #[error("invalid noise variance {0}: must be positive")]
    InvalidVariance(f64),
    #[error("range error: {0}")]
    Range(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("end of stream: need {needed} symbols, only {available} available")]
    EndOfStream { needed: usize, available: usize },
    #[error("blind ambiguity unresolvable: best correlation {0:.3} below 0.1")]
    Unresolvable(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
