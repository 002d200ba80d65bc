use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("state not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },
    #[error("period mismatch: {0} vs {1}")]
    PeriodMismatch(f64, f64),
    #[error("aliasing: {samples} samples cannot resolve harmonics up to {k_max}")]
    Aliasing { samples: usize, k_max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("control value {value} outside declared bounds [{lo}, {hi}]")]
    ControlOutOfBounds { value: f64, lo: f64, hi: f64 },
    #[error("branch selection failed: {0}")]
    BranchError(String),
    #[error("boundary closure is singular (leading kernel coefficient vanishes)")]
    SingularBoundaryClosure,
    #[error("matrix is not Hermitian: max asymmetry {0:.3e}")]
    NotHermitian(f64),
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("numerical abort: {0}")]
    NumericalAbort(String),
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
