//! Library surface of the experiment runner: configuration documents,
//! instance construction and the subcommand implementations. The `nmh`
//! binary is a thin argument parser over [`commands`].

pub mod commands;
pub mod config;
pub mod out;
pub mod setup;
