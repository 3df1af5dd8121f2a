//! Crate-wide error type and result alias.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A primitive was applied to tensors whose shapes do not conform.
    #[error("{primitive}: {message}")]
    Shape {
        primitive: &'static str,
        message: String,
    },

    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("parameter {0:?} already registered")]
    DuplicateParameter(String),

    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),

    #[error("non-finite gradient for parameter {0:?}")]
    NonFiniteGradient(String),

    #[error("loss is not deterministic under a fixed seed ({0} vs {1})")]
    NondeterministicLoss(f64, f64),

    /// Parse or validation failure in an input file, with its line number.
    #[error("{path}:{line}: {message}")]
    Load {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(
        "training aborted: non-finite loss at epoch {epoch}, step {step}, \
         batch element {element} (window origin {origin})"
    )]
    TrainAbort {
        epoch: usize,
        step: usize,
        element: usize,
        origin: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for data problems, 3 for numerical
    /// aborts. Usage errors (1) are handled by the argument parser.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TrainAbort { .. } | Error::NonFiniteGradient(_) => 3,
            _ => 2,
        }
    }
}
