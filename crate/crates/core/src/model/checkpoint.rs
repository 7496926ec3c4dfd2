//! Model checkpoint file.
//!
//! ```text
//! magic         4 bytes "SQCK"
//! version       u32 (1)
//! hidden_dim    u32
//! num_blocks    u32
//! num_heads     u32
//! max_len       u32
//! num_items     u32
//! dropout_rate  f64
//! seed          u64
//! epoch         u32
//! num_tensors   u32
//! tensors       num_tensors x (rows u32, cols u32, rows*cols f64)
//! has_adam      u8
//!   step u64, lr f64, beta1 f64, beta2 f64, eps f64,
//!   first moments (same layout as tensors, no shape prefix), then second moments
//! state_len     u32, followed by state_len bytes of UTF-8 (opaque run state)
//! ```
//!
//! Everything is little-endian; tensors appear in [`param_names`] order.
//!
//! [`param_names`]: super::param_names

use std::path::Path;

use super::optim::{Adam, AdamConfig};
use super::tensor::Matrix;
use super::{ModelConfig, ModelParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SQCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub epoch: u32,
    pub optimizer: Option<Adam>,
    /// Free-form run state (the experiment runner stores JSON here).
    pub state: String,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let cfg = ck.params.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    for v in [cfg.hidden_dim, cfg.num_blocks, cfg.num_heads, cfg.max_len, cfg.num_items] {
        put_u32(&mut out, v as u32);
    }
    out.extend_from_slice(&cfg.dropout_rate.to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    put_u32(&mut out, ck.epoch);
    let tensors = ck.params.tensors();
    put_u32(&mut out, tensors.len() as u32);
    for t in tensors {
        put_u32(&mut out, t.rows() as u32);
        put_u32(&mut out, t.cols() as u32);
        put_f64s(&mut out, t.data());
    }
    match &ck.optimizer {
        None => out.push(0),
        Some(adam) => {
            out.push(1);
            out.extend_from_slice(&adam.step.to_le_bytes());
            let c = adam.config;
            put_f64s(&mut out, &[c.lr, c.beta1, c.beta2, c.eps]);
            for m in adam.m.iter().chain(&adam.v) {
                put_f64s(&mut out, m.data());
            }
        }
    }
    put_u32(&mut out, ck.state.len() as u32);
    out.extend_from_slice(ck.state.as_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.buf.len() {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let bytes = self.take(n * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(buf: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let config = ModelConfig {
        hidden_dim: dims[0],
        num_blocks: dims[1],
        num_heads: dims[2],
        max_len: dims[3],
        num_items: dims[4],
        dropout_rate: r.f64()?,
        seed: r.u64()?,
    };
    let epoch = r.u32()?;
    let n = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        tensors.push(Matrix::from_vec(rows, cols, r.f64s(rows * cols)?));
    }
    let params = ModelParams::from_tensors(config, tensors).map_err(|e| e.to_string())?;
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let c = r.f64s(4)?;
            let config = AdamConfig {
                lr: c[0],
                beta1: c[1],
                beta2: c[2],
                eps: c[3],
            };
            let read_moments = |r: &mut Reader| {
                params
                    .tensors()
                    .iter()
                    .map(|t| Ok(Matrix::from_vec(t.rows(), t.cols(), r.f64s(t.len())?)))
                    .collect::<std::result::Result<Vec<_>, String>>()
            };
            let m = read_moments(&mut r)?;
            let v = read_moments(&mut r)?;
            Some(Adam { config, step, m, v })
        }
        other => return Err(format!("bad optimizer flag {other}")),
    };
    let len = r.u32()? as usize;
    let state = String::from_utf8(r.take(len)?.to_vec()).map_err(|e| e.to_string())?;
    if r.pos != buf.len() {
        return Err(format!("{} trailing bytes", buf.len() - r.pos));
    }
    Ok(Checkpoint {
        params,
        epoch,
        optimizer,
        state,
    })
}

/// Writes atomically (temp file + rename) so an interrupted write never leaves
/// a truncated checkpoint behind.
pub fn write_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    std::fs::write(&tmp, encode(ck)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
