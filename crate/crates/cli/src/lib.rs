//! Command-line front end for the kicked-rotor lab: config parsing,
//! subcommands and CSV/manifest output.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
