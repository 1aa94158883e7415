use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: required input {path} does not exist (run the earlier stage first)")]
    MissingInput { stage: &'static str, path: PathBuf },

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] readmit_core::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Process exit codes. Stable across releases.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INPUT: u8 = 3;
    pub const NUMERIC: u8 = 4;
    pub const IO: u8 = 5;
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use readmit_core::Error as E;
        match self {
            CliError::Config(_) => exit::USAGE,
            CliError::MissingInput { .. } => exit::INPUT,
            CliError::Io { .. } => exit::IO,
            CliError::Serialize(_) => exit::INTERNAL,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => exit::USAGE,
                E::Csv(_)
                | E::Schema(_)
                | E::Data(_)
                | E::Parse { .. }
                | E::Version { .. }
                | E::Dimension { .. } => exit::INPUT,
                E::Numeric(_) => exit::NUMERIC,
                E::Io { .. } => exit::IO,
                E::Serialize(_) => exit::INTERNAL,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
