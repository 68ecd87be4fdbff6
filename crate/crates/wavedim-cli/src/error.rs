//! Process-level failure classes and their exit codes.

use std::fmt;

/// Exit code 1: the configuration (file, flags, or their combination) is
/// unusable. Exit code 2: the computation itself failed. Exit code 3: a
/// sweep finished but some γ points failed.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    PartialSweep { failed: usize, total: usize },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::PartialSweep { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            CliError::PartialSweep { failed, total } => {
                write!(f, "partial sweep failure: {failed} of {total} damping values failed")
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<wavedim::Error> for CliError {
    fn from(err: wavedim::Error) -> Self {
        CliError::Numeric(err.to_string())
    }
}

/// I/O problems while writing results count as numeric failures; config
/// reading wraps its own errors as `Config` at the call site.
impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o: {err}"))
    }
}
