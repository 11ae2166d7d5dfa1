//! Command-line front end: configuration files, the four commands and their
//! CSV output.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{
    grad, optimize, steady, sweep, GradOutcome, OptimizeSpec, SeedRun, SteadyOutcome, SteadyRow, SweepRow, SweepSpec,
};
pub use config::{Observable, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Solver(#[from] steadygrad::Error),

    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status: 2 for configuration and file problems, 4 for a
    /// degenerate steady state, 3 for any other solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(steadygrad::Error::Degenerate { .. }) => 4,
            CliError::Solver(_) => 3,
        }
    }
}

/// Round-trippable rendering used for every floating-point CSV field.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}
