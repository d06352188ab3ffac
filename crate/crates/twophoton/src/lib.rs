//! Configuration files, CSV/JSON formats and the command-line driver for
//! the `twophoton-core` simulator.

pub mod commands;
pub mod conf;
pub mod error;
pub mod formats;
pub mod manifest;
mod parallel;

pub use commands::{run, Command, Outputs, RunOptions};
pub use conf::RunConfig;
pub use error::CliError;
pub use twophoton_core as core;
