use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration; maps to exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while executing a run; maps to exit code 3.
    #[error("run failed: {0}")]
    Run(String),
    #[error(transparent)]
    Core(#[from] spikemix_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
