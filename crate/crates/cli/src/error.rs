use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const SAMPLER: i32 = 4;
    pub const CONVERGENCE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("checksum mismatch in {}", .0.display())]
    Checksum(PathBuf),
    #[error("sampler failed: {0}")]
    Sampler(#[source] nbmix::Error),
    #[error("{0}")]
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => exit::IO,
            Self::Usage(_) => exit::USAGE,
            Self::Input(_) | Self::Checksum(_) => exit::INPUT,
            Self::Sampler(_) => exit::SAMPLER,
            Self::Convergence(_) => exit::CONVERGENCE,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
