use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pole of {function} at {argument}")]
    Pole { function: &'static str, argument: String },

    #[error("quadrature did not converge on [{lower}, {upper}]: estimated error {estimate:e} > tolerance {tolerance:e}")]
    Quadrature { lower: f64, upper: f64, estimate: f64, tolerance: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("singular QFI configuration: pure-state denominator {denominator:e} with radial term {numerator:e} against tangential {tangential:e}")]
    SingularQfi { denominator: f64, numerator: f64, tangential: f64 },

    #[error("negative fidelity argument: det = {0:e}")]
    NegativeDeterminant(f64),

    #[error("mismatched state family: {0}")]
    FamilyMismatch(String),

    #[error("measure support too narrow: tail weight {tail:e} exceeds {threshold:e} of the peak at |omega| = {omega_max}")]
    InsufficientSupport { omega_max: f64, tail: f64, threshold: f64 },

    #[error("recurrence lost positivity at index {index}: b = {value:e}")]
    RecurrenceBreakdown { index: usize, value: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
