use std::path::PathBuf;

/// Errors produced anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An elementary operation was applied outside its domain.
    #[error("domain error in `{op}` at node {node}: {detail}")]
    Domain {
        op: &'static str,
        node: usize,
        detail: String,
    },

    /// Malformed graph, shape or layer description.
    #[error("structural error: {0}")]
    Structural(String),

    /// Input width does not match a layer's fan-in.
    #[error("dimension mismatch at layer {layer}: expected {expected}, got {got}")]
    Dimension {
        layer: usize,
        expected: usize,
        got: usize,
    },

    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A non-finite number appeared where a finite one is required.
    #[error("non-finite value at index {index}: {what}")]
    Numeric { index: usize, what: String },

    /// The problem cannot be wrapped with hard initial/boundary constraints.
    #[error("unsupported constraint: {0}")]
    UnsupportedConstraint(String),

    /// A finite-difference configuration violates its stability bound.
    #[error("rejected configuration: {0}")]
    Stability(String),

    /// Training produced a non-finite loss; `history` holds every finite
    /// record up to that point.
    #[error("non-finite loss at iteration {iteration}")]
    Diverged {
        iteration: usize,
        history: Box<crate::training::TrainingHistory>,
    },

    /// No analytical or reference solution is available.
    #[error("no reference available: {0}")]
    NoReference(String),

    /// Configuration parse or validation failure, naming the offending key path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Malformed data file.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
