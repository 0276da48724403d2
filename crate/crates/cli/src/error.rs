use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const CONVERGED: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    pub const USAGE: i32 = 64;
    pub const ALIASING: i32 = 65;
    pub const UNREADABLE_INPUT: i32 = 66;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    UnreadableInput {
        path: PathBuf,
        #[source]
        source: pinnbias::Error,
    },

    #[error(transparent)]
    Core(#[from] pinnbias::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: invalid config: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("cannot serialise manifest: {0}")]
    ConfigWrite(#[from] toml::ser::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::UnreadableInput { .. } => exit::UNREADABLE_INPUT,
            CliError::Core(e) => core_exit_code(e),
            _ => exit::FAILURE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }
}

fn core_exit_code(e: &pinnbias::Error) -> i32 {
    match e {
        pinnbias::Error::Aliasing { .. } => exit::ALIASING,
        pinnbias::Error::Catalog(_) => exit::USAGE,
        pinnbias::Error::Training { source, .. } => core_exit_code(source),
        _ => exit::FAILURE,
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
