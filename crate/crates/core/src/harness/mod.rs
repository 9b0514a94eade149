//! Configuration, persistence, plotting and the command-line commands.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod metrics;
pub mod plot;

pub use checkpoint::Checkpoint;
pub use cli::{Cli, Command, Failure};
pub use config::RunConfig;
pub use metrics::{read_metrics, MetricsRow, MetricsWriter};
pub use plot::write_plots;
