//! Command-line orchestration for drltrade. The binary is a thin wrapper
//! around [`commands::run`]; everything is exposed here so tests can drive
//! commands in-process.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use commands::{run, Cli};
pub use error::CliError;
