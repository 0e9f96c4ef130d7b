//! Command-line front end: argument parsing, experiment orchestration and
//! CSV/JSON rendering. The binary is a thin wrapper around [`commands::run`].

pub mod args;
pub mod commands;
pub mod output;
