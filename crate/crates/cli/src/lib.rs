//! Command-line front end for `colltest`: testers on files or synthetic
//! families, moment reports, oracle validation, and sample-complexity sweeps.

pub mod commands;
pub mod svg;
pub mod sweep;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] colltest::Error),
    #[error("{0}")]
    Usage(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exit code for any error.
pub const EXIT_ERROR: i32 = 2;
