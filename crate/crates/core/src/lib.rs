//! Stackelberg equilibrium between a reinsurer and an insurer selling an
//! equity-linked product with a capital guarantee, in a two-asset
//! Black-Scholes market.
//!
//! The reinsurer sells puts on a constant-mix benchmark and chooses the safety
//! loading; the insurer chooses how many puts to buy and invests without
//! access to the second risky asset. Everything is available in closed form
//! for power, log and (insurer-side) HARA utility, and a seeded Monte Carlo
//! engine checks each closed form independently.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod option;
pub mod simulation;
pub mod solve;
pub mod strategies;

pub use equilibrium::{solve_equilibrium, BestResponse, ContractTerms, StackelbergEquilibrium, Utility};
pub use error::{Error, Result};
pub use market::{optimal_dual_shift, DualShift, MarketParams, PathEnsemble, TimeGrid, Vec2};
pub use option::{put_price, put_price_auxiliary, PutQuote, ReinsuranceContract};
pub use strategies::MarketState;
