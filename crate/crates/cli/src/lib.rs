//! Batch front end: run configurations, the task pipeline and its reports.

pub mod config;
pub mod pipeline;
pub mod summary;

pub use config::{parse_config, RunConfig, Task};
pub use pipeline::{run_pipeline, Manifest, Status};
pub use summary::emit_summary;
