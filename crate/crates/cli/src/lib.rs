//! Command implementations behind the `xpikesim` binary.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod selftest;

pub use error::{CliError, CliResult};
