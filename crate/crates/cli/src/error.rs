use std::fmt::Display;
use std::path::Path;

use otmap_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations; exit code 1.
    #[error("{0}")]
    Usage(String),

    /// Malformed input files; exit code 2.
    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(path: &Path, e: impl Display) -> Self {
        CliError::Parse(format!("{}: {e}", path.display()))
    }

    pub fn output(path: &Path, e: impl Display) -> Self {
        CliError::Io(std::io::Error::other(format!("{}: {e}", path.display())))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(
                CoreError::InvalidArgument(_)
                | CoreError::InvalidMap(_)
                | CoreError::AxisOutOfRange { .. }
                | CoreError::EnumerationCap { .. }
                | CoreError::InfiniteAlpha,
            ) => 1,
            _ => 2,
        }
    }
}
