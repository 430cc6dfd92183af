use thiserror::Error;

/// Errors shared by all analysis modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lag {lag} for series of length {len}")]
    InvalidLag { lag: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("insufficient fit range: {0}")]
    InsufficientRange(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("drift support is one-sided: {0}")]
    OneSidedSupport(String),
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unfillable gap: {0}")]
    UnfillableGap(String),
    #[error("timestamp ordering: {0}")]
    Ordering(String),
    #[error("timestamp off the expected grid: {0}")]
    Unaligned(String),
    #[error("slice out of range: {0}")]
    Range(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
