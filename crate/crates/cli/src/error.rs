use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "missing digit data in {dir}: expected either the MNIST pair(s)\n  {mnist}\nor the synthetic stand-in corpus\n  {synth}\nGenerate the latter with `polymax make-data --data-dir {dir}`."
    )]
    MissingData {
        dir: PathBuf,
        mnist: String,
        synth: String,
    },

    #[error(transparent)]
    Core(#[from] polymax::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems the caller must fix, 1 for violated
    /// invariants and runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingData { .. } => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
