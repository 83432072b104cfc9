use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("shell is open: foreground voxel at grid boundary ({0}, {1}, {2})")]
    OpenShell(usize, usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no descent: step size underflowed below {0:e}")]
    NoDescent(f64),
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("schema error: missing or malformed column `{0}`")]
    Schema(String),
    #[error("value error in row {row}: {message}")]
    Value { row: usize, message: String },
    #[error("table has no data rows")]
    EmptyTable,
    #[error("degenerate baseline: {0}")]
    DegenerateBaseline(String),
    #[error("design error: {0}")]
    Design(String),
    #[error("covariance structures are not nested: {0}")]
    NotNested(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("degenerate column: {0}")]
    DegenerateColumn(String),
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("missing data: {0}")]
    MissingData(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
