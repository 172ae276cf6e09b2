use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument must have a positive real part (got Re = {0})")]
    NonPositiveRealPart(f64),
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("invalid Bernstein specification: {0}")]
    SpecInvalid(String),
    #[error("window too narrow: truncation remainder {remainder:e} exceeds {limit:e}")]
    WindowTooNarrow { remainder: f64, limit: f64 },
    #[error("Laplace truncation too large: lambda*T = {0} < 30")]
    TruncationTooLarge(f64),
    #[error("unsupported specification: {0}")]
    UnsupportedSpec(String),
    #[error("numerical inversion unstable at {at}: primary {primary:e} vs check {check:e}")]
    InversionUnstable { at: f64, primary: f64, check: f64 },
    #[error("degenerate jump law: nu(gamma) = 0")]
    DegenerateLaw,
    #[error("no level crossing before the horizon (level {level}, horizon {horizon})")]
    NoCrossing { level: f64, horizon: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("initial datum outside the generator domain proxy: {0}")]
    DomainProxyViolation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures that stem from numerical instability rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure(_)
                | Error::InversionUnstable { .. }
                | Error::WindowTooNarrow { .. }
                | Error::TruncationTooLarge(_)
                | Error::GridTooCoarse(_)
                | Error::NoCrossing { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
