use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),
    #[error("point lies at the origin of partition block {block}")]
    BlockAtOrigin { block: usize },
    #[error("white noise has no pointwise correlation function")]
    WhiteNoisePointwise,
    #[error("convergence failure in {what}: achieved error estimate {achieved:e}")]
    ConvergenceFailure { what: String, achieved: f64 },
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("operation requires the local (critical) regime")]
    NotLocalRegime,
    #[error("time {t} is outside the convergence range of the moment series (bound {limit})")]
    OutsideConvergence { t: f64, limit: f64 },
    #[error("step function is not nondecreasing and nonnegative at index {0}")]
    NotMonotone(usize),
    #[error("exponent domain violated: {0}")]
    ExponentDomain(String),
    #[error("at least {needed} terms are required, got {got}")]
    InsufficientTerms { needed: usize, got: usize },
    #[error("parameters are critical or supercritical: 2(b+r) - b*alpha/a - 1 = {0}")]
    CriticalOrSupercritical(f64),
    #[error("oracle domain: {0}")]
    OracleDomain(String),
    #[error("overflow in {0}")]
    Overflow(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure { .. }
                | Error::Divergent(_)
                | Error::BudgetExceeded(_)
                | Error::OutsideConvergence { .. }
                | Error::Overflow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
