//! Experiment orchestration: configuration, runs, metrics, summaries and
//! the live session server.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod session;
pub mod summary;

pub use config::{parse_key_values, ExperimentConfig};
pub use experiment::{load_actor, run_experiment, run_seed, ExperimentOutcome, SeedOutcome};
pub use metrics::{AggregateRow, MetricsRow};
pub use session::{serve_session, SessionConfig, SessionMode, SessionReport};
pub use summary::{summarize, SeedStat, SummaryRow};
