//! File formats, configuration, parallel execution and the command-line
//! front end for the `ccdsim-core` simulator.

#![deny(rust_2018_idioms)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod format;
pub mod runner;
pub mod sweep;

pub use error::{CliError, ExitKind, Result};
