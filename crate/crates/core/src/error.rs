use std::path::PathBuf;

use thiserror::Error;

use crate::selftrain::IterationDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// How a failure should be reported to the caller of a batch run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or missing input data.
    Data,
    /// The algorithm could not proceed on otherwise valid data.
    Algorithm,
    /// Invalid parameters.
    Config,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("window too small: width {width}s holds fewer than two samples at period {period}s")]
    WindowTooSmall { width: i64, period: i64 },

    #[error("invalid window spec: {0}")]
    InvalidWindow(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("empty class")]
    EmptyClass,

    #[error("invalid bandwidth {0}")]
    InvalidBandwidth(f64),

    #[error("degenerate labeling: {reason}")]
    DegenerateLabeling {
        reason: String,
        /// Rounds completed before the labeling degenerated, when raised by a training run.
        diagnostics: Option<Box<IterationDiagnostics>>,
    },

    #[error("estimator infeasible")]
    EstimatorInfeasible,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("index set mismatch: {0}")]
    IndexMismatch(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("labelings not retained")]
    LabelingsNotRetained,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateLabeling { .. } | Error::EstimatorInfeasible => ErrorKind::Algorithm,
            Error::InvalidConfig(_)
            | Error::InvalidWindow(_)
            | Error::WindowTooSmall { .. }
            | Error::InvalidBandwidth(_)
            | Error::EmptyGrid => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
