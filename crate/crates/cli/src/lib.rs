//! Command-line front end for `velod-core`: every stage reads and writes
//! plain CSV/JSON/OBJ/SVG files tagged with the tool version and seed.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult, ErrorKind};
pub use pipeline::run_pipeline;
