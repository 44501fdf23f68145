//! Versioned binary checkpoint container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  b"KANCKPT\0"
//! u32    format version (currently 1)
//! u32    model kind length, then UTF-8 bytes
//! u64    config hash
//! u32    tensor count
//! per tensor (sorted by name):
//!   u32    name length, then UTF-8 bytes
//!   u8     requires_grad
//!   u32    ndim, then ndim x u64 extents
//!   f64[]  values
//! ```
//!
//! Values are stored as doubles regardless of the in-memory scalar type, so
//! the f64 instantiation round-trips bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::scalar::Scalar;
use crate::tensor::{ParameterSet, Tensor};
use crate::{Result, TensorError};

const MAGIC: &[u8; 8] = b"KANCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub model_kind: String,
    pub config_hash: u64,
}

pub fn save<S: Scalar>(
    path: &Path,
    model_kind: &str,
    config_hash: u64,
    params: &ParameterSet<S>,
) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    write_str(&mut w, model_kind)?;
    w.write_all(&config_hash.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, tensor) in params.iter() {
        write_str(&mut w, name)?;
        w.write_all(&[tensor.requires_grad() as u8])?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for &v in tensor.values() {
            w.write_all(&v.to_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load<S: Scalar>(path: &Path) -> Result<(CheckpointHeader, ParameterSet<S>)> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TensorError::Checkpoint(format!(
            "bad magic {magic:?}, not a checkpoint file"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let model_kind = read_str(&mut r)?;
    let config_hash = read_u64(&mut r)?;
    let count = read_u32(&mut r)?;

    let mut params = ParameterSet::new();
    for _ in 0..count {
        let name = read_str(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let ndim = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut values = Vec::with_capacity(numel);
        let mut buf = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut buf)?;
            values.push(S::from_f64(f64::from_le_bytes(buf)));
        }
        let mut tensor = Tensor::new(shape, values)?;
        if flag[0] == 0 {
            tensor = tensor.frozen();
        }
        params.insert(&name, tensor)?;
    }
    Ok((
        CheckpointHeader { version, model_kind, config_hash },
        params,
    ))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(TensorError::Checkpoint(format!("implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| TensorError::Checkpoint(e.to_string()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
