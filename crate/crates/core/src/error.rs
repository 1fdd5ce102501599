use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("filter offset {offset} lies outside a window of depth {depth}")]
    OutOfWindow { offset: usize, depth: usize },

    #[error("window depth {got} is smaller than the required depth {required}")]
    DepthMismatch { required: usize, got: usize },

    #[error("innovation law mismatch: model expects {expected}, window carries {got}")]
    LawMismatch { expected: String, got: String },

    #[error("{operation} is not supported for {model}")]
    Unsupported { operation: &'static str, model: String },

    #[error("degenerate variance {value:e} (long-run variance must be positive)")]
    DegenerateVariance { value: f64 },

    #[error("no block layout with m/2 <= m' <= m exists for n = {n}, m = {m}")]
    Layout { n: usize, m: usize },

    #[error("need at least {need} usable points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("identity residual {residual:e} exceeds {tolerance:e}")]
    IdentityResidual { residual: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
