//! Binary parameter container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "DGNNCKPT"
//! version    u32      CHECKPOINT_VERSION
//! seed       u64      ParamStore seed
//! meta_len   u64      length of the JSON metadata block
//! meta       bytes    UTF-8 JSON (model config, MLP specs, ...)
//! count      u64      number of tensors
//! per tensor:
//!   name_len u32, name bytes (UTF-8)
//!   ndim     u32, dims u64 × ndim
//!   data     f64 × prod(dims)
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::params::ParamStore;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DGNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(
    mut w: W,
    params: &ParamStore,
    metadata: &serde_json::Value,
) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&params.seed().to_le_bytes())?;
    let meta = serde_json::to_vec(metadata)?;
    w.write_all(&(meta.len() as u64).to_le_bytes())?;
    w.write_all(&meta)?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for t in params.tensors() {
        w.write_all(&(t.name.len() as u32).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for d in &t.shape {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_len<R: Read>(r: &mut R, limit: u64, what: &str) -> Result<usize> {
    let n = read_u64(r)?;
    if n > limit {
        return Err(Error::Checkpoint(format!("{what} of {n} exceeds limit")));
    }
    Ok(n as usize)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(ParamStore, serde_json::Value)> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let seed = read_u64(&mut r)?;
    let meta_len = read_len(&mut r, 1 << 30, "metadata length")?;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)
        .map_err(|e| Error::Checkpoint(format!("truncated metadata: {e}")))?;
    let metadata: serde_json::Value = serde_json::from_slice(&meta)?;

    let count = read_len(&mut r, 1 << 20, "tensor count")?;
    let mut store = ParamStore::new(seed);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated name: {e}")))?;
        let name = String::from_utf8(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let ndim = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_len(&mut r, 1 << 32, "dimension")?);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        store.insert(&name, shape, data)?;
    }
    Ok((store, metadata))
}
