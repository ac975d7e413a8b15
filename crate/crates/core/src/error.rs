use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or configuration supplied by the caller.
    Usage,
    /// The data cannot support the requested computation.
    Data,
    /// An iterative or factorization routine failed.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("singular system: non-positive pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("observation {index} has leverage {leverage} (HC3 undefined)")]
    LeverageSingularity { index: usize, leverage: f64 },
    #[error("principal axis is vertical; orthogonal slope undefined")]
    DegenerateOrientation,
    #[error("zero correlation; geometric-mean slope sign is indeterminate")]
    SignIndeterminate,
    #[error("weak instrument: |cov(instrument, regressor)| = {0:e}")]
    WeakInstrument(f64),
    #[error("degenerate instrument: {0}")]
    DegenerateInstrument(String),
    #[error("subset covariance collapsed to lower rank (support {support:?})")]
    RankCollapse { support: Vec<usize> },
    #[error("insufficient data: n = {n}, p = {p}")]
    InsufficientData { n: usize, p: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("coordinate {0} has zero MAD")]
    DegenerateCoordinate(usize),
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("no usable rows after filtering ({dropped} dropped)")]
    EmptyData { dropped: usize },
    #[error("bootstrap unstable: {failed} of {total} resamples failed")]
    BootstrapInstability { failed: usize, total: usize },
    #[error("too many failed replications: {failed} of {total} ({detail})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) => ErrorKind::Usage,
            Error::NumericalFailure(_)
            | Error::SingularSystem { .. }
            | Error::RankCollapse { .. }
            | Error::LeverageSingularity { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
