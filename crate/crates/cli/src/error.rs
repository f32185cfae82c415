use std::path::PathBuf;

use durpipe::ErrorKind;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] durpipe::Error),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("bad config file {}: {source}", path.display())]
    ConfigFile { path: PathBuf, source: Box<toml::de::Error> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for I/O, 4 for bad data.
    pub fn exit_code(&self) -> i32 {
        let kind = match self {
            CliError::Core(e) => e.kind(),
            CliError::Read { .. } | CliError::Write { .. } => ErrorKind::Io,
            CliError::ConfigFile { .. } | CliError::Config(_) => ErrorKind::Config,
            CliError::Data(_) => ErrorKind::Data,
        };
        match kind {
            ErrorKind::Config => 2,
            ErrorKind::Io => 3,
            ErrorKind::Data => 4,
        }
    }
}
