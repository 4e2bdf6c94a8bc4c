//! Configuration, pipelines and diagnostics behind the `cavityqed` command.

pub mod config;
pub mod events;
pub mod pipeline;

pub use config::{ConfigError, RunConfig};
pub use pipeline::{run, Context, RunError};
