//! Library face of the command-line driver: configuration parsing and
//! command implementations, kept separate from the binary so integration
//! tests can exercise them directly.

pub mod commands;
pub mod config;
