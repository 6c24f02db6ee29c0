use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied value violates a documented precondition.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// A smoothing profile was rejected during kernel construction.
    #[error("kernel rejected: {0}")]
    KernelRejected(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// The time integration left the admissible state space.
    #[error("numerical blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    /// A requested diagnostic is undefined for the given input.
    #[error("diagnostic unavailable: {0}")]
    Diagnostic(String),

    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True when the error stems from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. } | Error::Quadrature(_) | Error::Diagnostic(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
