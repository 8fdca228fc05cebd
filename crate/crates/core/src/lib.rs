//! Contract pricing and market simulation for computational tasks.
//!
//! A broker ("agent") sits between consumers and a cloud provider. The
//! consumer describes what a result is worth to them as a piecewise-linear
//! utility over completion time and price; the agent knows, per resource
//! configuration, a cost rate and a completion-time distribution. From
//! those the agent prices a contract: per target interval, a probability,
//! an expected completion time, and a price function.
//!
//! The crate is organized around that pipeline:
//!
//! - [`histogram`], [`utility`], [`contract`]: shared domain types and the
//!   consumer-side evaluation of contracts.
//! - [`pricing`]: expected profit/demand and the closed-form optimal price
//!   for linear utility and demand, plus a grid-search oracle.
//! - [`risk`]: worst-case loss over bounded estimate error and
//!   risk-penalized pricing.
//! - [`taskgraph`]: per-subtask configuration assignment over task DAGs
//!   (dynamic program, greedy and exhaustive baselines).
//! - [`auction`]: a second-utility auction alternative to posted prices.
//! - [`bertrand`]: differentiated duopoly best responses and equilibria.
//! - [`simulator`]: seeded market scenarios and their metrics.
//! - [`files`]: JSON document formats and CSV output used by the CLI.

// Validation deliberately writes `!(x > 0.0)` so that NaN fails the check
// along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod bertrand;
pub mod contract;
pub mod error;
pub mod files;
pub mod histogram;
pub mod pricing;
pub mod risk;
pub mod simulator;
pub mod taskgraph;
#[cfg(test)]
pub(crate) mod testkit;
pub mod utility;

pub use contract::{expected_contract_utility, select_best_contract, Contract, PriceSchedule};
pub use error::{MarketError, Result};
pub use histogram::{cosine_similarity, CompletionHistogram};
pub use utility::{DemandCurve, PiecewiseUtility, UtilityPiece};
