// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

/// Failure classes surfaced by every layer of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown revision {0}")]
    UnknownRevision(u32),

    #[error("code extraction failed: {0}")]
    Extraction(String),

    #[error("llm failure after {attempts} attempt(s): {cause}")]
    Llm { attempts: u32, cause: String },

    #[error("tool failure: {0}")]
    Tool(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
