//! File formats, configuration, plotting, and parallel experiment
//! orchestration around the `capbandit-core` engine.

pub mod checkpoint;
pub mod config;
pub mod io;
pub mod plot;
pub mod runner;

use std::fmt;

/// CLI-side failures. Rendered as one machine-parsable line on stderr.
#[derive(Debug)]
pub enum CliError {
    /// Configuration key that the grammar does not know.
    UnknownKey {
        path: String,
    },
    /// Configuration value of the wrong shape.
    TypeError {
        path: String,
        expected: &'static str,
    },
    /// Structurally valid configuration with an invalid value.
    ValidationError {
        path: String,
        message: String,
    },
    /// Malformed input file (CSV, config, checkpoint).
    ParseError {
        file: String,
        line: usize,
        message: String,
    },
    /// Reward cell that is not a literal `0` or `1`.
    NonBinaryReward {
        file: String,
        line: usize,
    },
    /// Row with the wrong number of cells.
    DimensionMismatch {
        file: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    /// Attempt to plot an empty sweep table.
    EmptyTable,
    Io(std::io::Error),
    Engine(capbandit_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::UnknownKey { path } => write!(f, "unknown configuration key `{path}`"),
            CliError::TypeError { path, expected } => {
                write!(f, "configuration key `{path}` expects {expected}")
            }
            CliError::ValidationError { path, message } => {
                write!(f, "invalid value for `{path}`: {message}")
            }
            CliError::ParseError {
                file,
                line,
                message,
            } => write!(f, "{file}:{line}: {message}"),
            CliError::NonBinaryReward { file, line } => {
                write!(f, "{file}:{line}: reward must be a literal 0 or 1")
            }
            CliError::DimensionMismatch {
                file,
                line,
                expected,
                got,
            } => write!(f, "{file}:{line}: expected {expected} cells, got {got}"),
            CliError::EmptyTable => write!(f, "sweep table has no rows to plot"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// Short stable tag for the machine-parsable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::UnknownKey { .. } => "UnknownKey",
            CliError::TypeError { .. } => "TypeError",
            CliError::ValidationError { .. } => "ValidationError",
            CliError::ParseError { .. } => "ParseError",
            CliError::NonBinaryReward { .. } => "NonBinaryReward",
            CliError::DimensionMismatch { .. } => "DimensionMismatch",
            CliError::EmptyTable => "EmptyTable",
            CliError::Io(_) => "Io",
            CliError::Engine(_) => "Engine",
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<capbandit_core::Error> for CliError {
    fn from(e: capbandit_core::Error) -> Self {
        CliError::Engine(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
