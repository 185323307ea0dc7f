use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the partitioning, mapping and analysis stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid base {byte:?} at position {position}")]
    InvalidBase { position: usize, byte: u8 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt data in {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },

    #[error(
        "k-mer table for partition {partition} needs about {needed} bytes, over the {budget} byte \
         budget; increase the minimum substring length p or the partition count t"
    )]
    MemoryBudget {
        partition: usize,
        needed: u64,
        budget: u64,
    },

    #[error("malformed record in {path} at line {line}: {detail}")]
    MalformedRecord {
        path: PathBuf,
        line: u64,
        detail: String,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn corrupt(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
