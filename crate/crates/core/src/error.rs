use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::TourVerdict;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance size {0}: need at least 3 nodes")]
    InvalidSize(usize),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid tour: {0}")]
    InvalidTour(TourVerdict),

    #[error("insufficient candidates: requested {requested}, only {available} available")]
    InsufficientCandidates { requested: usize, available: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("prediction protocol error: {0}")]
    Protocol(String),

    #[error("adapter failed: {message}\n{diagnostics}")]
    Adapter {
        message: String,
        diagnostics: String,
    },

    #[error("oracle predictor needs a reference tour")]
    MissingContext,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("incomplete predictions: expected {expected}, got {got}")]
    IncompletePredictions { expected: usize, got: usize },

    #[error("degenerate scores: every off-diagonal entry is zero or non-finite")]
    DegenerateScores,

    #[error("instance has {0} nodes; exact solver is capped at {cap}", cap = crate::exact::MAX_EXACT_NODES)]
    SizeCap(usize),

    #[error("baseline length must be positive, got {0}")]
    InvalidBaseline(f64),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSize(_) => "invalid-size",
            Error::InvalidInstance(_) => "invalid-instance",
            Error::InvalidTour(_) => "invalid-tour",
            Error::InsufficientCandidates { .. } => "insufficient-candidates",
            Error::Parse { .. } => "parse",
            Error::Protocol(_) => "protocol",
            Error::Adapter { .. } => "adapter",
            Error::MissingContext => "missing-context",
            Error::Precondition(_) => "precondition",
            Error::IncompletePredictions { .. } => "incomplete-predictions",
            Error::DegenerateScores => "degenerate-scores",
            Error::SizeCap(_) => "size-cap",
            Error::InvalidBaseline(_) => "invalid-baseline",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}
