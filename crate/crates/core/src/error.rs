use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `x'Qx` is (numerically) zero where a gradient of the conic term was requested.
    #[error("x'Qx = {0:e} is below the zero threshold; gradient of the conic term undefined")]
    ZeroQuadratic(f64),

    #[error("point is infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported instance file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            got,
            expected,
        })
    }
}
