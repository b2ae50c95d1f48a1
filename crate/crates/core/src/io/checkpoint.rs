//! INR checkpoint: `"INR1" | header_len: u32 | JSON header | f64 payload`.
//!
//! The header records the encoding layout, the MLP widths and the trained
//! hyperparameters; the payload is [`InrParams::pack`] in little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::inr::{HashEncodingConfig, HashTables, InrParams, MlpParams};

use super::{atomic_write, FileError};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"INR1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub encoding: HashEncodingConfig,
    /// Full MLP widths, input and output included.
    pub widths: Vec<usize>,
    pub num_params: usize,
    pub lambda: f64,
    pub lambda_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: InrParams,
    pub lambda: f64,
    pub lambda_s: f64,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            encoding: self.params.config,
            widths: self.params.mlp.widths(),
            num_params: self.params.num_params(),
            lambda: self.lambda,
            lambda_s: self.lambda_s,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let flat = self.params.pack();
        let mut out = Vec::with_capacity(8 + json.len() + 8 * flat.len());
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &str) -> Result<Self, FileError> {
        let path = path.to_string();
        let truncated = || FileError::TruncatedHeader { path: path.clone() };
        let magic = bytes.get(0..4).ok_or_else(truncated)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(FileError::BadMagic {
                path: path.clone(),
                found: magic.try_into().unwrap(),
            });
        }
        let len =
            u32::from_le_bytes(bytes.get(4..8).ok_or_else(truncated)?.try_into().unwrap()) as usize;
        let json = bytes
            .get(8..8usize.saturating_add(len))
            .ok_or_else(truncated)?;
        let layout = |message: String| FileError::Layout {
            message: format!("{path}: {message}"),
        };
        let header: CheckpointHeader = serde_json::from_slice(json)
            .map_err(|e| layout(format!("bad checkpoint header: {e}")))?;
        header
            .encoding
            .validate()
            .map_err(|e| layout(e.to_string()))?;
        let mlp = MlpParams::zeros(&header.widths).map_err(|e| layout(e.to_string()))?;
        let mut params = InrParams {
            config: header.encoding,
            tables: HashTables::zeros(&header.encoding),
            mlp,
        };
        params.validate().map_err(|e| layout(e.to_string()))?;
        if params.num_params() != header.num_params {
            return Err(layout(format!(
                "header declares {} parameters, layout has {}",
                header.num_params,
                params.num_params()
            )));
        }
        let payload = &bytes[8 + len..];
        let expected = header.num_params as u64 * 8;
        if payload.len() as u64 != expected {
            return Err(FileError::LengthMismatch {
                path,
                expected,
                found: payload.len() as u64,
            });
        }
        let flat: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.unpack(&flat).expect("length checked");
        Ok(Self {
            params,
            lambda: header.lambda,
            lambda_s: header.lambda_s,
        })
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<(), FileError> {
    atomic_write(path.as_ref(), &checkpoint.encode())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, FileError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| FileError::io(path, e))?;
    Checkpoint::decode(&bytes, &path.display().to_string())
}
