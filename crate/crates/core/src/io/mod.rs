//! File formats: binary PPM/PGM images and flat key-value config files.

pub mod config;
pub mod pnm;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

impl IoError {
    pub(crate) fn format(path: &std::path::Path, msg: impl Into<String>) -> Self {
        IoError::Format { path: path.display().to_string(), msg: msg.into() }
    }
}
