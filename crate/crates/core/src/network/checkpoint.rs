//! Versioned binary checkpoint container.
//!
//! ```text
//! offset  size  content
//! 0       8     magic  b"KDNTKCKP"
//! 8       4     format version, u32 little-endian (currently 1)
//! 12      4     header length H, u32 little-endian
//! 16      H     UTF-8 JSON header {"config": NetConfig, "seed": u64,
//!               "epoch": usize, "param_count": usize}
//! 16+H    8·p   parameters, f64 little-endian, in ParamVector layout
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetConfig, ParamVector};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"KDNTKCKP";
const VERSION: u32 = 1;

/// Network parameters at a given training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamVector,
    pub seed: u64,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(params: ParamVector, seed: u64, epoch: usize) -> Self {
        Self { params, seed, epoch }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetConfig,
    seed: u64,
    epoch: usize,
    param_count: usize,
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        config: *ckpt.params.config(),
        seed: ckpt.seed,
        epoch: ckpt.epoch,
        param_count: ckpt.params.len(),
    })
    .map_err(|e| Error::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for v in ckpt.params.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    r.read_exact(&mut word)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if header.param_count != header.config.param_count() {
        return Err(Error::Checkpoint(format!(
            "header declares {} parameters, config implies {}",
            header.param_count,
            header.config.param_count()
        )));
    }
    let mut values = Vec::with_capacity(header.param_count);
    let mut buf = [0u8; 8];
    for _ in 0..header.param_count {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(Checkpoint {
        params: ParamVector::from_values(header.config, values)?,
        seed: header.seed,
        epoch: header.epoch,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), ckpt)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
