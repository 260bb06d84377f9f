//! Batch runner behind the `miclab` binary: configs in, CSV/JSON artifacts
//! and a run manifest out.

pub mod config;
pub mod ingest;
pub mod jobs;
pub mod output;

pub use ingest::ingest_points;
pub use jobs::{run, Command, JobSpec, Report, Status};
