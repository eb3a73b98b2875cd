use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical abort: {message}; diagnostic written to {}", .diagnostic.display())]
    Numerical { message: String, diagnostic: PathBuf },

    #[error("{0}")]
    Library(#[from] gradband::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            // Parameter validation inside the library is a config problem too.
            CliError::Config(_) | CliError::Library(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}
