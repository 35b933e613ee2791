//! JCKP checkpoint files.
//!
//! ```text
//! "JCKP"  u8 version
//! u32 json_len, json        config echo (method spec, init seed, ...)
//! u32 tensor_count
//! per tensor: u16 name_len, name, u8 ndims, u32 dims[ndims], f32 data[]
//! ```
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use jpegclass::ExtractionConfig;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::models::{MethodSpec, Model};
use crate::optim::TrainConfig;
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"JCKP";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckpointMeta {
    pub spec: MethodSpec,
    pub init_seed: u64,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub extraction: Option<ExtractionConfig>,
    #[serde(default)]
    pub class_names: Vec<String>,
}

fn io(e: std::io::Error) -> NnError {
    NnError::Checkpoint(e.to_string())
}

pub fn write_checkpoint<F: Real, W: Write>(mut w: W, model: &Model<F>, meta: &CheckpointMeta) -> Result<()> {
    let json = serde_json::to_vec(meta).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&[VERSION]).map_err(io)?;
    w.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    let params = model.params();
    w.write_all(&(params.len() as u32).to_le_bytes()).map_err(io)?;
    let mut buf = Vec::new();
    for (name, t) in params {
        buf.clear();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(t.dims().len() as u8);
        for &d in t.dims() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint, rebuilding the architecture from the embedded spec.
pub fn read_checkpoint<F: Real, R: Read>(mut r: R) -> Result<(Model<F>, CheckpointMeta)> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head).map_err(io)?;
    if &head[..4] != MAGIC {
        return Err(NnError::Checkpoint("not a JCKP file".into()));
    }
    if head[4] != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {}", head[4])));
    }
    let len = read_u32(&mut r)? as usize;
    if len > 1 << 24 {
        return Err(NnError::Checkpoint("config block too large".into()));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let meta: CheckpointMeta = serde_json::from_slice(&json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let mut model = Model::<F>::zeros(&meta.spec)?;
    model.set_init_seed(meta.init_seed);

    let expected: Vec<(String, Vec<usize>)> = model.params().into_iter().map(|(n, t)| (n, t.dims().to_vec())).collect();
    let count = read_u32(&mut r)? as usize;
    if count != expected.len() {
        return Err(NnError::Checkpoint(format!("expected {} tensors, file has {count}", expected.len())));
    }
    let mut targets = model.params_mut();
    for ((name, dims), target) in expected.iter().zip(targets.iter_mut()) {
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2).map_err(io)?;
        let mut nb = vec![0u8; u16::from_le_bytes(b2) as usize];
        r.read_exact(&mut nb).map_err(io)?;
        let mut nd = [0u8; 1];
        r.read_exact(&mut nd).map_err(io)?;
        let file_dims = (0..nd[0]).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if nb != name.as_bytes() || &file_dims != dims {
            return Err(NnError::Checkpoint(format!(
                "tensor {:?} {file_dims:?} does not match {name} {dims:?}",
                String::from_utf8_lossy(&nb)
            )));
        }
        let mut raw = vec![0u8; target.len() * 4];
        r.read_exact(&mut raw).map_err(io)?;
        for (dst, c) in target.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = F::from_f64(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(NnError::Checkpoint("trailing data".into()));
    }
    Ok((model, meta))
}

pub fn save_checkpoint<F: Real>(path: &std::path::Path, model: &Model<F>, meta: &CheckpointMeta) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(&mut w, model, meta)?;
    w.flush().map_err(io)
}

pub fn load_checkpoint<F: Real>(path: &std::path::Path) -> Result<(Model<F>, CheckpointMeta)> {
    let file = std::fs::File::open(path).map_err(io)?;
    read_checkpoint(std::io::BufReader::new(file))
}
