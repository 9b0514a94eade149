//! DDPG bidding agent: actor/critic with target copies, replay buffer,
//! Ornstein-Uhlenbeck exploration and the train/evaluate loops.

mod agent;
mod hyper;
mod noise;
mod replay;
mod train;

pub use agent::{soft_update, Agent};
pub use hyper::Hyperparameters;
pub use noise::OuNoise;
pub use replay::{ReplayBuffer, Transition};
pub use train::{evaluate, evaluate_policy, train, EpisodeMetrics, EvaluationReport, TraceRow, Trainer};
