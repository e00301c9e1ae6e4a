use std::path::Path;

use thiserror::Error;
use volspill_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, missing inputs, or data the pipeline cannot use.
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn missing(path: &Path, err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::NotFound {
            CliError::User(format!("missing file: {}", path.display()))
        } else {
            CliError::User(format!("cannot read {}: {err}", path.display()))
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

fn is_user(err: &CoreError) -> bool {
    match err {
        CoreError::Context { source, .. } => is_user(source),
        CoreError::RankDeficient { .. } => false,
        _ => true,
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        if is_user(&err) {
            CliError::User(err.to_string())
        } else {
            CliError::Internal(err.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::User(err.to_string())
    }
}
