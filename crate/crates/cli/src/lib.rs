//! Batch front end: run configurations, pipeline commands and their reports.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{execute, output_dir, run, Command, Failure};
pub use config::{Geometry, RunConfig};
pub use report::{Check, RunReport, Stage};
