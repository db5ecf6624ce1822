//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. The CLI maps error classes
//! to exit codes: config/usage errors exit 2, divergence exits 3, I/O exits 4.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shapes incompatible with the requested operation.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A precondition stated by an operation's contract was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Loss or gradient became non-finite during optimization.
    #[error("divergence: {context}")]
    Divergence { context: String },

    /// Malformed input data.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// Invalid configuration value or unusable flag combination.
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint file failed structural validation.
    #[error("checkpoint error in {path:?}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },

    #[error("unsupported checkpoint version {found:?} (expected {expected})")]
    UnsupportedVersion { found: String, expected: String },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn divergence(context: impl Into<String>) -> Self {
        Error::Divergence {
            context: context.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config/usage, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Divergence { .. } => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
