use thiserror::Error;

/// Errors produced by configuration validation, stream I/O, and metrics.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("delta must lie strictly in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("privacy budget rho must be positive, got {0}")]
    InvalidRho(f64),

    #[error("alpha must lie strictly in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no alpha in (0, 1) yields {target} checkpoints for substream length {sub_len}")]
    UnreachableCheckpointCount { sub_len: u64, target: usize },

    #[error("stream history retention is disabled; enable it to answer range queries")]
    HistoryDisabled,

    #[error("invalid query range [{lo}, {hi}] at time {t}")]
    InvalidRange { lo: u64, hi: u64, t: u64 },

    #[error("invalid stream spec: {0}")]
    InvalidStreamSpec(String),

    #[error("parse error at line {line}: {reason}")]
    StreamParse { line: usize, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("relative error is undefined for a zero true frequency")]
    ZeroTruthFrequency,

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
