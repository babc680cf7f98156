//! Library side of the `recdrop` command-line tool.

pub mod commands;
pub mod config;
