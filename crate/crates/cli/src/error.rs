use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("analysis error: {0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Analysis(_) => 4,
        }
    }

    pub fn read(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Config(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<rjpt_core::Error> for CliError {
    fn from(e: rjpt_core::Error) -> Self {
        match e {
            rjpt_core::Error::Config(m) => CliError::Config(m),
            rjpt_core::Error::Data(m) | rjpt_core::Error::Domain(m) => CliError::Data(m),
            rjpt_core::Error::Analysis(m) => CliError::Analysis(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
