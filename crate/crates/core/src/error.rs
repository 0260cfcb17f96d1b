use thiserror::Error;

/// Errors raised by the library. Every variant carries enough context to
/// locate the offending input without a debugger.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("quadrature did not reach tolerance {tolerance:e} (achieved residual {residual:e})")]
    Accuracy { residual: f64, tolerance: f64 },

    #[error("covariance has lags up to {available}, window of length {window} requires tau_max >= {required}")]
    InsufficientLags {
        available: usize,
        required: usize,
        window: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")]
    NonSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    Indefinite { min_eigenvalue: f64 },

    #[error("Jacobi iteration did not converge in {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("{what} {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: usize,
        range: String,
    },

    #[error("shift-invariance system has rank below {n} (smallest singular value ratio {ratio:e})")]
    DegenerateBasis { n: usize, ratio: f64 },

    #[error("orthogonal projection is ill-conditioned (smallest singular value {singular_value:e})")]
    Conditioning { singular_value: f64 },

    #[error("internal consistency check failed: {what} ({lhs:e} vs {rhs:e})")]
    Consistency { what: String, lhs: f64, rhs: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dimension(expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
