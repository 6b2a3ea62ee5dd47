use thiserror::Error;

#[derive(Debug, Error)]
pub enum FairingError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("parameter {0} outside the domain [0, 1]")]
    Domain(f64),

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("cannot insert knot {u}: multiplicity would exceed degree {degree}")]
    KnotMultiplicity { u: f64, degree: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("row {0} of the iteration matrix is zero; cannot normalize")]
    ZeroRow(usize),

    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    Singular { pivot: f64, column: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("iteration diverged at k = {0}")]
    Diverged(usize),

    #[error("iteration is not contractive: spectral radius estimate {0}")]
    NotContractive(f64),

    #[error("curvature undefined: {0}")]
    UndefinedCurvature(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = FairingError> = std::result::Result<T, E>;
