//! Discrete-time market-making simulator.
//!
//! `N` independent tabular Q-learners quote two-sided spreads on a `K`-level
//! grid under a maker-taker (or taker-maker) fee schedule. Alongside the
//! learning simulation, [`game`] computes the exact one-period expected reward
//! matrix and classifies its pure Nash and cooperative profiles.

pub mod agent;
pub mod config;
pub mod error;
pub mod experiment;
pub mod game;
pub mod market;
pub mod sim;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_sweep, AggregateResult, SweepTable};
pub use game::{build_reward_matrix, EquilibriumReport, RewardMatrix};
pub use market::{FeeSchedule, MarketParams, PriceGrid};
pub use sim::{run_instance, InstanceResult};
