//! DTF1 dense tensor files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset 0       b"DTF1"
//! offset 4       order: u32
//! offset 8       order extents: u64 each
//! offset 8+8m    prod(extents) values: f64, last index fastest
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const MAGIC: &[u8; 4] = b"DTF1";

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn encode_dtf1(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.order() + 8 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.order() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<const N: usize>(bytes: &[u8], at: usize, what: &str) -> Result<[u8; N]> {
    bytes
        .get(at..at + N)
        .map(|s| s.try_into().expect("length checked"))
        .ok_or_else(|| format_err(bytes.len(), format!("truncated while reading {what}")))
}

pub fn decode_dtf1(bytes: &[u8]) -> Result<DenseTensor> {
    let magic: [u8; 4] = take(bytes, 0, "magic")?;
    if &magic != MAGIC {
        return Err(format_err(0, format!("bad magic {:?}, expected \"DTF1\"", String::from_utf8_lossy(&magic))));
    }
    let order = u32::from_le_bytes(take(bytes, 4, "order")?) as usize;
    if order == 0 {
        return Err(format_err(4, "order must be >= 1"));
    }
    let mut dims = Vec::with_capacity(order.min(64));
    let mut len: usize = 1;
    for k in 0..order {
        let at = 8 + 8 * k;
        let d = u64::from_le_bytes(take(bytes, at, "extents")?);
        if d == 0 {
            return Err(format_err(at, format!("extent {} is zero", k + 1)));
        }
        let d = usize::try_from(d).map_err(|_| format_err(at, "extent does not fit in memory"))?;
        len = len
            .checked_mul(d)
            .ok_or_else(|| format_err(at, "element count overflows"))?;
        dims.push(d);
    }
    let start = 8 + 8 * order;
    let expected = len
        .checked_mul(8)
        .and_then(|n| n.checked_add(start))
        .ok_or_else(|| format_err(start, "payload size overflows"))?;
    if bytes.len() < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: header declares {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(expected, format!("{} trailing bytes after payload", bytes.len() - expected)));
    }
    let mut values = Vec::with_capacity(len);
    for (i, chunk) in bytes[start..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(format_err(start + 8 * i, format!("non-finite value {v}")));
        }
        values.push(v);
    }
    DenseTensor::new(dims, values)
}

pub fn read_dtf1(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dtf1(&bytes)
}

pub fn write_dtf1(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dtf1(t)).map_err(|e| Error::io(path, e))
}
