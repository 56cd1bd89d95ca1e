use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate periodic wrap: supercell dimension {0} must be at least 2")]
    DegenerateWrap(usize),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parameter count mismatch: ansatz expects {expected}, got {got}")]
    ParameterCount { expected: usize, got: usize },

    /// A tractability or memory guard was exceeded.
    #[error("guard exceeded: {0}")]
    Guard(String),

    #[error("clique capacity exceeded: {n_logical} variables need a Chimera grid with m >= {required_m}")]
    CliqueCapacity { n_logical: usize, required_m: usize },

    #[error("no embedding found after {0} tries")]
    NoEmbedding(usize),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
