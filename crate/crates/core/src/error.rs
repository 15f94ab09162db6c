use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("Laplace inversion methods disagree at t={t}: talbot={talbot:e}, euler={euler:e}")]
    InversionDisagreement { t: f64, talbot: f64, euler: f64 },

    #[error("operation not supported for this spec: {0}")]
    Unsupported(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(
        "infinite mean rate: the subordinator has E[S_1] = +inf, occupation measures are infinite"
    )]
    InfiniteMeanRate,

    #[error("path budget exceeded after {steps} steps (stream {stream_id})")]
    PathBudget { steps: u64, stream_id: u64 },

    #[error("tail inversion did not bracket within {0} bisection steps")]
    Bracketing(usize),

    #[error("absorbing state {0} inside the domain")]
    Absorbing(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_positive(name: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(invalid(name, format!("must be finite and > 0, got {x}")));
    }
    Ok(())
}

pub(crate) fn ensure_nonnegative(name: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(invalid(name, format!("must be finite and >= 0, got {x}")));
    }
    Ok(())
}
