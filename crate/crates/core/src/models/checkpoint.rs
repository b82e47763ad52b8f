//! Single-file model checkpoints.
//!
//! Layout: 8-byte magic, little-endian `u32` format version, little-endian
//! `u64` body length, then a JSON body. JSON floats round-trip exactly, so a
//! restored model reproduces the original scores bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FittedModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"STHSCKPT";

#[derive(Serialize, Deserialize)]
struct Body {
    model: FittedModel,
}

pub fn save_checkpoint(model: &FittedModel, path: &Path) -> Result<()> {
    let body = serde_json::to_vec(&Body { model: model.clone() })?;
    let mut buf = Vec::with_capacity(body.len() + 20);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(body.len() as u64).to_le_bytes());
    buf.extend_from_slice(&body);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<FittedModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint(format!("{}: not a checkpoint file", path.display())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: format version {version}, expected {CHECKPOINT_VERSION}",
            path.display()
        )));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() - 20 != len {
        return Err(Error::Checkpoint(format!(
            "{}: truncated body ({} of {len} bytes)",
            path.display(),
            bytes.len() - 20
        )));
    }
    let body: Body = serde_json::from_slice(&bytes[20..])?;
    Ok(body.model)
}
