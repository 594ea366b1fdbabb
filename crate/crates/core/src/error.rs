use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by the command-line front end to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("jpeg parse error at {marker}: {message}")]
    Parse { marker: String, message: String },

    #[error("jpeg encode error: {0}")]
    Encode(String),

    #[error("container error: {0}")]
    Container(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("payload infeasible: {requested:.3} bits requested, capacity {capacity:.3} bits")]
    PayloadInfeasible { requested: f64, capacity: f64 },

    #[error("message too long: {bits} bits, limit {limit} bits")]
    MessageTooLong { bits: usize, limit: usize },

    #[error("wet column: no admissible flip pattern realizes the syndrome")]
    WetColumn,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged {
        epoch: usize,
        last_finite: Box<crate::analyzer::AnalyzerModel>,
    },

    #[error("incomplete oracle response: {}", .0.display())]
    OracleIncomplete(PathBuf),

    #[error("oracle timed out after {0} s waiting for the DONE sentinel")]
    OracleTimeout(u64),

    #[error("train/test overlap: image {0} appears in both splits")]
    SplitOverlap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn parse(marker: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            marker: marker.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::ShapeMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", actual.0, actual.1),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::MessageTooLong { .. } => ErrorKind::Usage,
            Error::PayloadInfeasible { .. }
            | Error::WetColumn
            | Error::Numerical(_)
            | Error::Diverged { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
