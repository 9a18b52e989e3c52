//! Solver for strong-substitutes product-mix auctions.
//!
//! Bidders submit lists of positive and negative bids over `n` goods. Given a
//! target supply the crate checks bid lists for validity, finds the
//! component-wise minimal market-clearing price by steepest descent on a
//! Lyapunov function, and splits the supply so that every bidder receives a
//! bundle it demands at that price.
//!
//! All solver arithmetic is exact over `Ratio<i64>`. The only floating point
//! lives inside the minimum-norm-point routine in [`sfm`], whose candidate
//! answers are re-checked exactly.

pub mod allocation;
pub mod bids;
pub mod error;
pub mod exec;
pub mod goods;
pub mod graphs;
pub mod pricing;
pub mod sfm;
pub mod testgen;
pub mod validity;

pub type Scalar = num_rational::Ratio<i64>;

pub use allocation::{allocate, initial_problem, AllocationProblem, ParamsRule, Solution};
pub use bids::{
    demanded_bundle, demanded_goods, indirect_utility, is_demanded, is_marginal, project_bid,
    shift_bids, surplus_gap, valuation, Bid, BidList, Bundle, Price, SurplusGap,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use goods::GoodSet;
pub use pricing::{DescentTrace, PriceProblem, PriceSolution, StepRule, TraceStep};
pub use validity::{check_validity, Validity};
