//! Binary checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "TOTCKPT\0"
//! version      u32      1
//! variant      u8       0 baseline_lstm, 1 independent_lstms,
//!                       2 baseline_lstm_mm, 3 independent_lstms_mm
//! task         u8       0 take-over times, 1 readiness index
//! input_dim    u32
//! hidden_dim   u32
//! num_modes    u32
//! window       u32      frames per input window
//! seed         u64
//! tensors      u32      count, then per tensor:
//!   name_len   u16, name (UTF-8)
//!   ndim       u8, dims (u32 each)
//!   data       f64 x product(dims)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::{ModelConfig, Variant};
use super::network::{Model, Task};
use crate::dataset::write_atomic;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TOTCKPT\0";
pub const VERSION: u32 = 1;

pub fn encode(model: &Model) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::with_capacity(64 + 8 * model.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(cfg.variant.code());
    out.push(model.task().code());
    for v in [
        cfg.input_dim,
        cfg.hidden_dim,
        cfg.num_modes,
        cfg.window_frames,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    let tensors = model.named_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, data) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint(
            "not a checkpoint (bad magic bytes)".into(),
        ));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let variant = r.u8()?;
    let variant = Variant::from_code(variant)
        .ok_or_else(|| Error::Checkpoint(format!("unknown variant code {variant}")))?;
    let task = r.u8()?;
    let task = Task::from_code(task)
        .ok_or_else(|| Error::Checkpoint(format!("unknown task code {task}")))?;
    let config = ModelConfig {
        variant,
        input_dim: r.u32()? as usize,
        hidden_dim: r.u32()? as usize,
        num_modes: r.u32()? as usize,
        window_frames: r.u32()? as usize,
        seed: r.u64()?,
    };
    let mut model = Model::with_task(config, task)
        .map_err(|e| Error::Checkpoint(format!("invalid stored configuration: {e}")))?;
    let expected: Vec<(String, Vec<usize>)> = model
        .named_tensors()
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, {} expected for {variant}",
            expected.len()
        )));
    }
    let mut tensors = model.tensors_mut();
    for ((name, shape), dst) in expected.iter().zip(tensors.iter_mut()) {
        let len = r.u16()? as usize;
        let stored = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if stored != name {
            return Err(Error::Checkpoint(format!(
                "expected tensor `{name}`, found `{stored}`"
            )));
        }
        let ndim = r.u8()? as usize;
        let dims = (0..ndim)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if &dims != shape {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {dims:?}, expected {shape:?}"
            )));
        }
        for v in dst.iter_mut() {
            *v = r.f64()?;
        }
    }
    drop(tensors);
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(model);
    write_atomic(path.as_ref(), |w| w.write_all(&bytes))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
