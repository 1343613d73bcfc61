//! Minimal binary and ASCII netpbm (PGM/PPM) support.
//!
//! Handles `P2`, `P3`, `P5` and `P6` with any maxval up to 65535; samples
//! wider than one byte are big-endian as the format requires.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 for gray, 3 for RGB.
    pub channels: usize,
    pub maxval: u16,
    /// Interleaved samples, row-major.
    pub data: Vec<u16>,
}

impl Image {
    /// Luma in `[0,1]`; RGB uses `0.299 R + 0.587 G + 0.114 B`.
    pub fn to_luma(&self) -> Grid2D {
        let scale = 1.0 / self.maxval as f64;
        Grid2D::from_fn(self.height, self.width, |y, x| {
            let i = (y * self.width + x) * self.channels;
            if self.channels == 1 {
                self.data[i] as f64 * scale
            } else {
                let (r, g, b) = (self.data[i] as f64, self.data[i + 1] as f64, self.data[i + 2] as f64);
                (0.299 * r + 0.587 * g + 0.114 * b) * scale
            }
        })
    }

    /// Gray image from a grid of `[0,1]` values (clamped, rounded).
    pub fn from_unit_grid(g: &Grid2D, maxval: u16) -> Self {
        let m = maxval as f64;
        Self {
            width: g.width(),
            height: g.height(),
            channels: 1,
            maxval,
            data: g
                .values()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * m).round() as u16)
                .collect(),
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&[u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() && self.buf[self.pos] != b'#' {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.buf[start..self.pos])
    }

    fn number(&mut self) -> Option<usize> {
        std::str::from_utf8(self.token()?).ok()?.parse().ok()
    }
}

pub fn read(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|msg| Error::format(path, None, msg))
}

pub fn decode(buf: &[u8]) -> std::result::Result<Image, String> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.token().ok_or("empty file")?;
    let (channels, binary) = match magic {
        b"P2" => (1, false),
        b"P3" => (3, false),
        b"P5" => (1, true),
        b"P6" => (3, true),
        other => return Err(format!("unsupported magic {:?}", String::from_utf8_lossy(other))),
    };
    let width = cur.number().ok_or("bad width")?;
    let height = cur.number().ok_or("bad height")?;
    let maxval = cur.number().ok_or("bad maxval")?;
    if width == 0 || height == 0 {
        return Err("zero-sized image".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    let n = width * height * channels;
    let data = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = cur.pos + 1;
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let raster = buf
            .get(start..start + n * bytes_per)
            .ok_or_else(|| format!("truncated raster: expected {} bytes", n * bytes_per))?;
        if bytes_per == 1 {
            raster.iter().map(|&b| b as u16).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        }
    } else {
        (0..n)
            .map(|_| cur.number().map(|v| v as u16).ok_or("truncated ASCII raster"))
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    if data.iter().any(|&v| v as usize > maxval) {
        return Err("sample exceeds maxval".into());
    }
    Ok(Image {
        width,
        height,
        channels,
        maxval: maxval as u16,
        data,
    })
}

pub fn encode(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval > 255 {
        for &v in &img.data {
            out.extend_from_slice(&v.to_be_bytes());
        }
    } else {
        out.extend(img.data.iter().map(|&v| v as u8));
    }
    out
}

pub fn write(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}
