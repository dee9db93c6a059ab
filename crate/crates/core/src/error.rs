use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("non-positive price at line {line}")]
    NonPositivePrice { line: u64 },

    #[error("duplicate timestamp at line {line}")]
    DuplicateTimestamp { line: u64 },

    #[error("gap of {gap_ms} ms after {after} does not match frequency {frequency}")]
    FrequencyMismatch {
        after: String,
        gap_ms: i64,
        frequency: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported frequency '{0}'")]
    UnsupportedFrequency(String),

    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("degenerate sample")]
    Degenerate,

    #[error("optimizer did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("no finite liquidation price for a short position at leverage {0}")]
    NoFiniteLiquidation(f64),

    #[error("missing fit for cell {0}")]
    MissingFit(String),

    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("no run artifacts in {0}")]
    NoRunArtifacts(PathBuf),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_cell(self, cell: impl Into<String>) -> Self {
        Error::Cell {
            cell: cell.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: 1 for bad input or configuration,
    /// 2 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate
            | Error::NonConvergence { .. }
            | Error::MissingFit(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::Cell { .. } => 2,
            _ => 1,
        }
    }
}
