//! Library side of the `specfsm` command-line tool: configuration loading,
//! pipeline stage wiring, and the artifact layout shared by the CLI binary
//! and the fixture generator.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
