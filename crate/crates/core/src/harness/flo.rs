//! Binary flow files.
//!
//! Layout, all little-endian: the 4-byte tag `CFLO`, `height` and `width`
//! as `u32`, then `height × width` pairs of `f32` `(dy, dx)` in row-major
//! order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::grid::Grid2D;

pub const MAGIC: [u8; 4] = *b"CFLO";

pub fn encode(flow: &FlowField) -> Vec<u8> {
    let (h, w) = flow.dims();
    let mut out = Vec::with_capacity(12 + 8 * h * w);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = flow.get(y, x);
            out.extend_from_slice(&(dy as f32).to_le_bytes());
            out.extend_from_slice(&(dx as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(buf: &[u8]) -> std::result::Result<FlowField, String> {
    if buf.len() < 12 || buf[..4] != MAGIC {
        return Err("missing CFLO header".into());
    }
    let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap()) as usize;
    let (h, w) = (word(4), word(8));
    if h == 0 || w == 0 {
        return Err("zero-sized flow".into());
    }
    let body = &buf[12..];
    if body.len() != 8 * h * w {
        return Err(format!("expected {} payload bytes, found {}", 8 * h * w, body.len()));
    }
    let mut dy = Vec::with_capacity(h * w);
    let mut dx = Vec::with_capacity(h * w);
    for c in body.chunks_exact(8) {
        dy.push(f32::from_le_bytes(c[..4].try_into().unwrap()) as f64);
        dx.push(f32::from_le_bytes(c[4..].try_into().unwrap()) as f64);
    }
    let grid = |v| Grid2D::new(h, w, v).map_err(|e| e.to_string());
    FlowField::new(grid(dy)?, grid(dx)?).map_err(|e| e.to_string())
}

pub fn write(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(flow)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|m| Error::format(path, None, m))
}
