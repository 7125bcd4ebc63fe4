use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("eigensolver did not converge after {iterations} QR iterations")]
    NoConvergence { iterations: usize },

    #[error("eigenvectors are numerically defective (condition estimate {condition:.3e})")]
    Defective { condition: f64 },

    #[error("degenerate spectrum: eigenvalues {first} and {second} are separated by {separation:.3e}")]
    DegenerateSpectrum {
        first: usize,
        second: usize,
        separation: f64,
    },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integrator exceeded {steps} steps before t = {t}")]
    TooManySteps { steps: usize, t: f64 },

    #[error("pulse has zero norm")]
    ZeroNorm,

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("sweep grid has {points} points, above the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("target rate {target:.6e} outside achievable range [{min:.6e}, {max:.6e}]")]
    OutOfRange { target: f64, min: f64, max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Validation { .. }
            | Error::GridMismatch(_)
            | Error::GridTooLarge { .. }
            | Error::OutOfRange { .. } => ErrorKind::Validation,
            Error::NoConvergence { .. }
            | Error::Defective { .. }
            | Error::DegenerateSpectrum { .. }
            | Error::StepUnderflow { .. }
            | Error::TooManySteps { .. }
            | Error::ZeroNorm => ErrorKind::Numerical,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse(_) => ErrorKind::Io,
        }
    }
}
