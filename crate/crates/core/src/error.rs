use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown market `{0}`")]
    UnknownMarket(String),

    #[error("unknown firm `{0}`")]
    UnknownFirm(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("firm `{firm}` has no access to market `{market}`")]
    NoAccess { firm: String, market: String },

    #[error("invalid market `{market}`: {reason}")]
    InvalidMarket { market: String, reason: String },

    #[error("invalid firm `{firm}`: {reason}")]
    InvalidFirm { firm: String, reason: String },

    #[error("invalid cost: {0}")]
    InvalidCost(String),

    #[error("invalid anchors: {0}")]
    InvalidAnchors(String),

    #[error("invalid shock on market `{market}`: {reason}")]
    InvalidShock { market: String, reason: String },

    #[error("quantity {quantity} exceeds capacity {cap}")]
    InfeasibleQuantity { quantity: f64, cap: f64 },

    #[error("quantity {0} is negative")]
    NegativeQuantity(f64),

    #[error("profile does not match the game: {0}")]
    ProfileShape(String),

    #[error("firm `{firm}` has an unbounded best response on market `{market}`")]
    Unbounded { firm: String, market: String },

    #[error("market `{0}` does not have an affine price function")]
    UnsupportedPrice(String),

    #[error("no convergence after {iterations} iterations (last change {change:e}, kkt residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        change: f64,
        residual: f64,
    },

    #[error("profile is not a certified equilibrium (kkt residual {residual:e} > {tol:e})")]
    NotCertified { residual: f64, tol: f64 },

    #[error("ratio is undefined: {0}")]
    DegenerateRatio(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerical pipeline (as opposed to malformed input).
    pub fn is_computational(&self) -> bool {
        matches!(
            self,
            Error::Unbounded { .. }
                | Error::NonConvergence { .. }
                | Error::NotCertified { .. }
                | Error::DegenerateRatio(_)
        )
    }
}
