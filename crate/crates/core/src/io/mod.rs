//! File formats: the `CXG1` array container, INR checkpoints and PNG
//! magnitude export.

mod array;
mod checkpoint;
mod png;

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use self::array::{
    read_array, read_grid, read_kspace, write_array, write_grid, write_kspace, Array, ArrayData,
    DType, MAGIC,
};
pub use self::checkpoint::{
    read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC,
};
pub use self::png::{export_png, png_bytes, to_gray8};

/// Errors from reading or writing files.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FileError {
    #[error("{path}: bad magic {found:?}, expected \"CXG1\"")]
    BadMagic { path: String, found: [u8; 4] },

    #[error("{path}: length mismatch: header implies {expected} payload bytes, found {found}")]
    LengthMismatch {
        path: String,
        expected: u64,
        found: u64,
    },

    #[error("{path}: unknown dtype code {code}")]
    UnknownDtype { path: String, code: u32 },

    #[error("{path}: array has empty or zero dims")]
    EmptyDims { path: String },

    #[error("{path}: truncated header")]
    TruncatedHeader { path: String },

    #[error("{message}")]
    Layout { message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl FileError {
    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        FileError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// Stable short identifier of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            FileError::BadMagic { .. } => "bad-magic",
            FileError::LengthMismatch { .. } => "length-mismatch",
            FileError::UnknownDtype { .. } => "unknown-dtype",
            FileError::EmptyDims { .. } => "empty-dims",
            FileError::TruncatedHeader { .. } => "truncated-header",
            FileError::Layout { .. } => "layout",
            FileError::Io { .. } => "io",
        }
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the compact JSON form of `value`.
pub fn fingerprint<T: serde::Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("value serializes to JSON"))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| FileError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| FileError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| FileError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| FileError::io(path, e.error))?;
    Ok(())
}
