use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("could not bracket the root of psi(theta) = {q}")]
    RootBracketFailure { q: f64 },
    #[error("jump law has no finite first moment")]
    InfiniteMean,
    #[error("marginal density unavailable: {0}")]
    DensityUnavailable(String),
    #[error("tolerance not met: best estimate {value} with error {error}")]
    ToleranceNotMet { value: f64, error: f64 },
    #[error("integrand returned a non-finite value at {at}")]
    NonFiniteEvaluation { at: f64 },
    #[error("Gaver-Stehfest terms disagree (spread {spread:e} at value {value})")]
    OscillationDetected { value: f64, spread: f64 },
    #[error("Laplace inversion failed: {0}")]
    InversionFailure(String),
    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(&'static str),
    #[error("draw-down function violates xi(z) < z at z = {z}")]
    DomainViolation { z: f64 },
    #[error("second draw-down function violates eta(z) < xi(z) at z = {z}")]
    OrderingViolation { z: f64 },
    #[error("semi-infinite tail did not converge: best estimate {value}, tail {tail:e}")]
    NonConvergentTail { value: f64, tail: f64 },
    #[error("{fraction} of paths were censored at the horizon cap")]
    ExcessiveCensoring { fraction: f64 },
}

impl Error {
    /// Errors that still carry a usable (flagged) estimate.
    pub fn best_estimate(&self) -> Option<f64> {
        match *self {
            Error::ToleranceNotMet { value, .. }
            | Error::OscillationDetected { value, .. }
            | Error::NonConvergentTail { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ToleranceNotMet { .. }
                | Error::NonFiniteEvaluation { .. }
                | Error::OscillationDetected { .. }
                | Error::InversionFailure(_)
                | Error::DegenerateDenominator(_)
                | Error::NonConvergentTail { .. }
                | Error::ExcessiveCensoring { .. }
                | Error::RootBracketFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
