use thiserror::Error;

/// Errors surfaced by the net, seminorm, quadrature, and operator layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("epsilon {eps} is not a grid point")]
    EpsilonNotOnGrid { eps: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative order {requested} exceeds capability {max}")]
    DerivativeOrder { requested: usize, max: usize },

    #[error("hermite index {requested} exceeds capability {max}")]
    HermiteIndex { requested: usize, max: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature nodes {m} outside supported range 1..={max}")]
    NodesOutOfRange { m: usize, max: usize },

    #[error("non-finite integrand value at {coords:?}")]
    NonFiniteSample { coords: Vec<f64> },

    #[error("incompatible operands: {0}")]
    Incompatible(String),

    #[error("resource budget exceeded: cost {cost} > budget {budget}")]
    Budget { cost: u64, budget: u64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
