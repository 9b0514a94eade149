//! Day-ahead electricity auction bidding laboratory.
//!
//! A replayed-price market environment that settles stepwise offering
//! curves against next-day clearing prices, and a DDPG agent built on a
//! small hand-written feed-forward network engine.
//!
//! * [`data`] parses hourly price exports, splits episode starts into
//!   train/test sets and serves normalized 168-hour windows.
//! * [`market`] settles offering curves and drives episodes.
//! * [`neural`] holds dense networks, backprop, Adam and gradient checking.
//! * [`ddpg`] is the agent: replay buffer, OU noise, updates, train/evaluate.
//! * [`harness`] is configuration, checkpoints, metrics, plots and the CLI.

pub mod data;
pub mod ddpg;
pub mod error;
pub mod harness;
pub mod market;
pub mod neural;

pub use error::{Error, Result};
