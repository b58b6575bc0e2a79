use thiserror::Error;

/// Errors raised by the simulator and the verification procedures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two objects that must share a lattice do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// NaN or infinite values in an input field.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A parameter is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or refinement loop failed to meet its tolerance.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// The requested operation is not defined for this configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An operation precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The explicit scheme would violate its stability bound.
    #[error("time step {dt:e} exceeds stability bound; use dt <= {suggested:e}")]
    StepSize { dt: f64, suggested: f64 },

    /// The solution left the finite range.
    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },

    /// More than 1% of ensemble paths blew up.
    #[error("{failed} of {total} paths blew up")]
    TooManyBlowUps { failed: usize, total: usize },

    /// Configuration parse or validation failure.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
