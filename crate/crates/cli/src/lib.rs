//! Command-line front end: configuration, dataset I/O, results bundles and
//! the subcommands.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod pipeline;
pub mod plot;

pub use error::{CliError, Result};
