//! Error type carrying the process exit code.
//!
//! Exit codes: 0 success, 1 usage or configuration problem, 2 pipeline or
//! provider failure, 3 evaluation input that does not match the expected
//! schema.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration. Exit code 1.
    Config(String),
    /// Segmentation, provider, or extraction failure. Exit code 2.
    Pipeline(String),
    /// Evaluation input failed to load or validate. Exit code 3.
    Eval(String),
}

impl CliError {
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Pipeline(_) => 2,
            CliError::Eval(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Pipeline(msg) | CliError::Eval(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl std::error::Error for CliError {}
