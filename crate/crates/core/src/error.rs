use thiserror::Error;

/// Everything that can go wrong while building, solving or serializing a tree system.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MyoError {
    #[error("invalid tree topology: {0}")]
    InvalidTopology(String),

    #[error("invalid grid {height}x{width}: {reason}")]
    InvalidGrid {
        height: usize,
        width: usize,
        reason: String,
    },

    #[error("coordinate ({x}, {y}) outside {height}x{width} grid")]
    OutOfRange {
        x: usize,
        y: usize,
        height: usize,
        width: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A diagonal block (after Schur updates) could not be factorized.
    /// `level` and `node` are 1-based, matching the problem file convention.
    #[error("singular block at level {level}, node {node}, head {head}")]
    Singular { level: usize, node: usize, head: usize },

    /// Gauge scaling block that is not invertible. Indices are 1-based.
    #[error("singular gauge block at level {level}, node {node}, head {head}")]
    SingularGauge { level: usize, node: usize, head: usize },

    #[error("singular matrix in dense oracle")]
    DenseSingular,

    /// Block LU of a tridiagonal chain hit a vanishing leading minor (1-based index).
    #[error("vanishing leading block minor at chain position {0}")]
    VanishingMinor(usize),

    #[error("size guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("problem file format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for MyoError {
    fn from(e: std::io::Error) -> Self {
        MyoError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MyoError>;
