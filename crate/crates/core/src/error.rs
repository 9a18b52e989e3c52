use thiserror::Error;

use crate::goods::GoodSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} goods, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bid weight must be +1 or -1, got {0}")]
    BadWeight(i64),

    #[error("too many goods: {0} (at most {max})", max = GoodSet::MAX_GOODS)]
    TooManyGoods(usize),

    #[error("price is marginal for the bid list; demand is not a single bundle")]
    MarginalPrice,

    #[error("bundle is not demanded at any price in the box [0, M]^n")]
    InfeasibleBundle,

    #[error("target is not demanded below the price bound {bound}")]
    InfeasibleTarget { bound: String },

    #[error("target bundle is not demanded at the supplied price")]
    NotClearing,

    #[error("{0} must be integral")]
    NonIntegral(&'static str),

    #[error("negative target quantity for good {0}")]
    NegativeTarget(usize),

    #[error("minimum-norm-point iteration did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("allocation problem has no marginal bids")]
    NoMarginals,

    #[error("demand cluster precondition violated: {0}")]
    BadCluster(String),

    #[error("operation needs a non-empty set")]
    EmptySet,

    #[error("instance exceeds the brute-force scale limit: {0}")]
    ScaleExceeded(String),

    #[error("gave up after {0} rejected generation rounds")]
    RetryLimit(usize),

    #[error("unknown bidder index {0}")]
    UnknownBidder(usize),
}
