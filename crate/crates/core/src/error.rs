use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what} is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { what: &'static str, defect: f64 },

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("parameter `{name}` = {value} outside its admissible range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: String,
    },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("time pair (t = {t}, s = {s}) violates s <= t")]
    NotOrdered { t: f64, s: f64 },

    #[error("invalid subdivision: {0}")]
    InvalidSubdivision(String),

    #[error("form is not coercive (coercivity constant {coercivity:.3e}); apply a shift first")]
    NotCoercive { coercivity: f64 },

    #[error("spectrum touches the closed left half-plane (min real part {min_re:.3e})")]
    SpectrumNotSectorial { min_re: f64 },

    #[error("non-finite entries encountered in {0}")]
    NonFinite(&'static str),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: format!("[{lo}, {hi}]"),
        })
    }
}
