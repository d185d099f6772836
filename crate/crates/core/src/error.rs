use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LbeeError>;

#[derive(Debug, Error)]
pub enum LbeeError {
    #[error("row '{0}' has zero norm and cannot be normalized")]
    ZeroNormRow(String),

    #[error("missing bundle file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("dimension mismatch: {what} has dim {found}, expected {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown id '{0}'")]
    UnknownId(String),

    #[error("duplicate id '{0}'")]
    DuplicateId(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("score table is empty")]
    EmptyScores,

    #[error("unknown outcome label '{0}' (expected correct, false_positive or false_negative)")]
    UnknownOutcomeLabel(String),

    #[error("requested {requested} clusters but only {rows} rows are available")]
    TooManyClusters { requested: usize, rows: usize },

    #[error("prototype of cluster {0} is degenerate (mean embedding has zero norm)")]
    DegeneratePrototype(usize),

    #[error("no easy clusters to contrast against")]
    NoEasyClusters,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("relevance matrices are defined over different id universes")]
    IdUniverseMismatch,

    #[error("evaluated subset is empty")]
    EmptySubset,

    #[error("could not sample {groups} directions with minimum angle {separation} rad in dim {dim}")]
    InfeasibleSeparation {
        groups: usize,
        dim: usize,
        separation: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown sweep parameter '{0}' (expected one of k, c, o, tau, a, method)")]
    UnknownSweepParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LbeeError {
    /// True for errors caused by malformed or inconsistent user input, as
    /// opposed to failures while computing.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            LbeeError::Io { .. }
                | LbeeError::DegeneratePrototype(_)
                | LbeeError::NoEasyClusters
                | LbeeError::InfeasibleSeparation { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            LbeeError::MissingFile(path)
        } else {
            LbeeError::Io { path, source }
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        let path = path.into();
        if let csv::ErrorKind::Io(e) = source.kind() {
            if e.kind() == std::io::ErrorKind::NotFound {
                return LbeeError::MissingFile(path);
            }
        }
        LbeeError::Csv { path, source }
    }
}
