//! Command-line front end: config files, experiment presets, CSV and SVG
//! output, and parameter sweeps.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runner;
pub mod sweep;

pub use config::RunConfig;
pub use error::CliError;
pub use runner::{run, Overrides, RunSummary};
pub use sweep::sweep;
