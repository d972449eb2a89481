//! Library half of the `aigem` command-line tool: argument definitions,
//! run configuration, the on-disk dataset cache, command implementations
//! and SVG figures.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod plot;

pub use commands::{run, Cli};
pub use error::{CliError, ExitKind};
