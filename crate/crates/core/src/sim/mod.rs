//! Discrete-event simulation of one run.

pub mod config;
pub mod engine;
pub mod event;
pub mod stats;
pub mod trace;

pub use config::{ConfigError, Mode, SimConfig};
pub use engine::{run, run_traced, DecisionRecord, NoTrace, TraceSink};
pub use stats::{BeaconCounts, DropCounts, NodeStats, RunStats};
