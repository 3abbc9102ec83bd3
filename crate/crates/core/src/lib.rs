//! Deep reinforcement learning engine for daily cryptocurrency trading.
//!
//! The pipeline runs OHLCV ingestion ([`market_data`]) into technical-feature
//! state construction ([`features`]), a trading MDP ([`env`]), four learners
//! built on a small from-scratch dense network ([`neural`], [`agents`]) and a
//! greedy replay on held-out data ([`backtest`]).
//!
//! Everything is deterministic given a seed. Data-parallel inner loops
//! (per-sample gradients, multi-seed runs) go through [`parallel::Execution`],
//! which is backed by rayon when the `parallel` feature is enabled and falls
//! back to plain iteration otherwise. Both paths produce bit-identical results.

pub mod agents;
pub mod backtest;
pub mod env;
pub mod error;
pub mod features;
pub mod fmt;
pub mod market_data;
pub mod neural;
pub mod parallel;

pub use error::{Error, Result};
