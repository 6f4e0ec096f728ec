//! Configuration loading and subcommands for the `cpcs` binary.

pub mod commands;
pub mod config;
pub mod quantity;
