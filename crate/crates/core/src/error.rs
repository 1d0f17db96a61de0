use thiserror::Error;

/// Errors produced by the construction, integration and certification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the domain `[-1, inf)` of `p` and `q`.
    #[error("argument t = {t} lies outside the domain [-1, inf)")]
    Domain { t: f64 },

    /// Argument outside the open domain `(0, rho)` of the inverse of `q`.
    #[error("value r = {r} lies outside the inversion domain (0, {rho})")]
    InversionDomain { r: f64, rho: f64 },

    #[error("root bracket for r = {r} not found after {doublings} doublings")]
    BracketNotFound { r: f64, doublings: usize },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e}) within {intervals} subintervals")]
    QuadratureTolerance {
        tol: f64,
        estimate: f64,
        intervals: usize,
    },

    #[error("step size {h:e} at t = {t} fell below the underflow limit")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("sampling grid too short: T_max = {t_max} but at least {required} is needed")]
    GridSpec { t_max: f64, required: f64 },

    #[error("|z| reached {z} beyond the dead zone threshold {threshold}")]
    DeadZoneExit { z: f64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Omega-limit estimates cannot be compared when the planar decay was not confirmed.
    #[error("omega estimates are incomparable: {0}")]
    Incomparable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
