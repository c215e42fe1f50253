//! Incentivized exploration with a goal MDP.
//!
//! The crate models arms with independent reward priors, the goal MDP over
//! sets of unexplored arms, the index policy that is optimal for
//! stochastically ordered negative arms, an exact dynamic-programming
//! solver, the exploration mechanisms built on top of it and an incentive
//! audit for their Bayesian incentive-compatible variant.

pub mod bic;
pub mod catalog;
pub mod dp;
pub mod error;
pub mod gmdp;
pub mod instance;
pub mod instance_file;
pub mod policies;
pub mod prior;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use gmdp::{Action, Choice, Decision, Policy, Portfolio, StateSet};
pub use instance::Instance;
pub use prior::RewardPrior;
