//! End-to-end driver: problem configs, stage runners and reports.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{kuramoto, room, ProblemConfig};
pub use pipeline::{run_stage, run_stages, Import, Options, RunDir, Stage};
