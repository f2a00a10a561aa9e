use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file}, line {line}: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("test_fraction must lie strictly between 0 and 1, got {0}")]
    InvalidSplitFraction(f64),

    #[error("conversion-rate calibration infeasible: {0}")]
    InfeasibleCalibration(String),

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("AUC undefined: scores contain only one class")]
    AucUndefined,

    #[error("training set contains no positive samples")]
    NoPositiveSamples,

    #[error("account `{0}` appears in both the training split and the evaluation set")]
    Leakage(String),

    #[error("sample has no individuals")]
    EmptyGroup,

    #[error("checkpoint is malformed: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
