//! Library half of the `tllsize` command: configuration parsing, controller
//! oracles and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod oracle;
