use thiserror::Error;

/// Errors raised by the evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponent gamma must exceed 1 (got {0})")]
    InvalidGamma(f64),

    #[error("sigma must lie in (1/2, 1) (got {0})")]
    InvalidSigma(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schedule exhausted: {what} needs {needed:.6e} but the truncated schedule reaches {limit:.6e}")]
    RangeExhausted { what: &'static str, needed: f64, limit: f64 },

    #[error("schedule value p[{0}] exceeds the exact integer range of binary64")]
    ScheduleOverflow(usize),

    #[error("value is indeterminate near a zero at {re}{im:+}i")]
    Indeterminate { re: f64, im: f64 },

    #[error("point {re}{im:+}i lies outside both sectors")]
    SectorMismatch { re: f64, im: f64 },

    #[error("finite-difference stencil crosses a seam")]
    SeamProximity,

    #[error("derivative vanishes (critical point)")]
    CriticalPoint,

    #[error("function vanishes where a nonzero value is required")]
    ZeroValue,

    #[error("root iteration did not converge for degree {degree} (residual {residual:e})")]
    NonConvergence { degree: usize, residual: f64 },

    #[error("argument increment not resolved near {re}{im:+}i")]
    ArgumentUnresolved { re: f64, im: f64 },

    #[error("{count} zeros not separated within diameter {diameter:e}")]
    ZerosUnresolved { count: usize, diameter: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
