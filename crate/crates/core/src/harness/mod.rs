//! Scripted experiments, their reports, and configuration parsing for the CLI.

pub mod config;
pub mod experiments;
pub mod literal;
pub mod report;

pub use config::HarnessConfig;
pub use experiments::{run, EXPERIMENTS};
pub use report::{Cell, Check, ExperimentReport, Row, Verdict};
