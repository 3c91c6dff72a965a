//! Crate-wide error type.

use std::fmt;

/// Errors produced by tensor algebra, the autograd engine, and the harness.
#[derive(Debug)]
pub enum Error {
    /// Shape/extent mismatch. Carries the operation name and both shapes.
    Shape { op: String, detail: String },
    /// A caller violated an operation's precondition.
    Contract(String),
    /// Degenerate numeric input (e.g. a zero-norm vector where a cosine is needed).
    Degenerate(String),
    /// A binary file failed to parse. `offset` is the byte position of the problem.
    Format { offset: u64, detail: String },
    /// I/O failure with the path that caused it.
    Io { path: String, detail: String },
    /// A gradient-check target was not deterministic, so finite differences are meaningless.
    OracleInvalid(String),
    /// Training produced a non-finite loss; `tensor` names the first offending tensor.
    NanLoss { tensor: String, step: usize },
    /// Bad configuration file or inconsistent hyperparameters.
    Config(String),
}

impl Error {
    pub fn shape(op: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            op: op.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, detail } => write!(f, "shape mismatch in {op}: {detail}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Format { offset, detail } => {
                write!(f, "format error at byte {offset}: {detail}")
            }
            Error::Io { path, detail } => write!(f, "i/o error on {path}: {detail}"),
            Error::OracleInvalid(msg) => write!(f, "gradient-check oracle invalid: {msg}"),
            Error::NanLoss { tensor, step } => {
                write!(f, "non-finite loss at step {step}; first NaN tensor: {tensor}")
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io {
            path: String::from("<unknown>"),
            detail: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
