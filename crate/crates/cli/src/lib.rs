//! Command-line front end: configuration, report files, and the
//! sample/synthesize/verify commands.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::CliError;
