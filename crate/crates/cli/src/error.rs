use std::path::PathBuf;

use starima_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("missing {}; run `starima {stage}` first", path.display())]
    Dependency { path: PathBuf, stage: &'static str },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 1 for usage and configuration, 3 for estimation failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(Error::Estimation(_)) => 3,
            _ => 2,
        }
    }
}
