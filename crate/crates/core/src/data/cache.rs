//! Binary dataset cache.
//!
//! Layout (all integers little-endian; `varint` is unsigned LEB128 and
//! `zigzag` maps signed deltas onto varints):
//!
//! ```text
//! magic            4 bytes  "SQDS"
//! version          u32      currently 1
//! num_users        u32
//! num_items        u32
//! min_count        u32
//! input_events     u64
//! filtered_events  u64
//! source           varint length + UTF-8 bytes
//! item raw ids     num_items x (varint length + UTF-8), item id 1 first
//! per user (id order):
//!   raw id         varint length + UTF-8
//!   length n       varint
//!   items          n x zigzag(item[k] - item[k-1]), item[-1] = 0
//!   timestamps     n x zigzag(ts[k] - ts[k-1]),     ts[-1] = 0
//! ```

use std::path::Path;

use super::{Dataset, ItemId, Provenance};
use crate::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"SQDS";
pub const CACHE_VERSION: u32 = 1;

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn put_zigzag(out: &mut Vec<u8>, v: i64) {
    put_varint(out, ((v << 1) ^ (v >> 63)) as u64);
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_varint(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

pub fn encode(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.num_users() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.num_items() as u32).to_le_bytes());
    let p = ds.provenance();
    out.extend_from_slice(&(p.min_count as u32).to_le_bytes());
    out.extend_from_slice(&(p.input_events as u64).to_le_bytes());
    out.extend_from_slice(&(p.filtered_events as u64).to_le_bytes());
    put_str(&mut out, &p.source);
    for raw in &ds.item_raw {
        put_str(&mut out, raw);
    }
    for u in ds.users() {
        put_str(&mut out, ds.user_raw(u));
        let seq = ds.sequence(u);
        put_varint(&mut out, seq.len() as u64);
        let mut prev = 0i64;
        for &i in seq {
            put_zigzag(&mut out, i as i64 - prev);
            prev = i as i64;
        }
        let mut prev = 0i64;
        for &t in ds.timestamps(u) {
            put_zigzag(&mut out, t - prev);
            prev = t;
        }
    }
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

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn varint(&mut self) -> std::result::Result<u64, String> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(format!("varint overflow at byte {}", self.pos))
    }

    fn zigzag(&mut self) -> std::result::Result<i64, String> {
        let v = self.varint()?;
        Ok(((v >> 1) as i64) ^ -((v & 1) as i64))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let n = self.varint()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| e.to_string())
    }
}

pub fn decode(buf: &[u8]) -> std::result::Result<Dataset, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != CACHE_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let num_users = r.u32()? as usize;
    let num_items = r.u32()? as usize;
    let min_count = r.u32()? as usize;
    let input_events = r.u64()? as usize;
    let filtered_events = r.u64()? as usize;
    let source = r.string()?;
    let item_raw = (0..num_items)
        .map(|_| r.string())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut user_raw = Vec::with_capacity(num_users);
    let mut sequences = Vec::with_capacity(num_users);
    let mut timestamps = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        user_raw.push(r.string()?);
        let n = r.varint()? as usize;
        let mut seq = Vec::with_capacity(n);
        let mut prev = 0i64;
        for _ in 0..n {
            prev += r.zigzag()?;
            if prev < 1 || prev as usize > num_items {
                return Err(format!("item id {prev} out of range"));
            }
            seq.push(prev as ItemId);
        }
        let mut ts = Vec::with_capacity(n);
        let mut prev = 0i64;
        for _ in 0..n {
            prev += r.zigzag()?;
            ts.push(prev);
        }
        sequences.push(seq);
        timestamps.push(ts);
    }
    if r.pos != buf.len() {
        return Err(format!("{} trailing bytes", buf.len() - r.pos));
    }
    Ok(Dataset::from_parts(
        sequences,
        timestamps,
        user_raw,
        item_raw,
        Provenance {
            source,
            min_count,
            input_events,
            filtered_events,
        },
    ))
}

pub fn write_cache(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode(ds)).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<Dataset> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
