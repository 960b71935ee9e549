//! Configuration files, the batch pipeline and its output files.

pub mod config;
pub mod run;

pub use config::{load_config, validate_config, RunConfig};
pub use run::{run, Command, RunManifest, StageError};
