use thiserror::Error;

use crate::scales::Instrument;

/// Item-level validation failures when scoring a questionnaire.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("{instrument} expects {expected} items, got {got}")]
    WrongItemCount {
        instrument: Instrument,
        expected: usize,
        got: usize,
    },
    #[error("{instrument} item {item} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        instrument: Instrument,
        item: usize,
        value: i32,
        min: i32,
        max: i32,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("pre and post samples differ in length ({pre} vs {post})")]
    LengthMismatch { pre: usize, post: usize },
    #[error("at least 2 paired observations are required, got {0}")]
    TooFew(usize),
    #[error("the paired differences have zero variance")]
    ZeroVariance,
    #[error("degrees of freedom must be >= 1, got {0}")]
    InvalidDf(u32),
    #[error("test statistic is not finite")]
    NonFinite,
    #[error("degenerate response matrix: {0}")]
    DegenerateMatrix(String),
    #[error("reliability needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("incomplete beta continued fraction did not converge")]
    NoConvergence,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },
    #[error("participant {0} is missing from one of the files")]
    ParticipantMismatch(String),
    #[error("participant {participant}: {source}")]
    Score {
        participant: String,
        #[source]
        source: ScoreError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
