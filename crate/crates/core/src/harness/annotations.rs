//! Actor box annotations: CSV lines `frame,x1,y1,x2,y2`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rank::{Annotations, PixelBox};

/// Reads a box CSV, clipping boxes to a `height × width` frame.
///
/// Blank lines, `#` comments and a leading `frame,x1,y1,x2,y2` header are
/// skipped. Boxes that stick out of the frame are clipped with a warning;
/// boxes entirely outside are dropped with a warning.
pub fn load_annotations(path: impl AsRef<Path>, height: usize, width: usize) -> Result<Annotations> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, height, width).map_err(|(line, msg)| Error::format(path, Some(line), msg))
}

pub fn parse_annotations(text: &str, height: usize, width: usize) -> std::result::Result<Annotations, (usize, String)> {
    let mut out = Annotations::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if out.is_empty() && fields.first() == Some(&"frame") {
            continue;
        }
        if fields.len() != 5 {
            return Err((lineno, format!("expected 5 fields, found {}", fields.len())));
        }
        let nums = fields
            .iter()
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| (lineno, format!("bad integer: {e}")))?;
        let (frame, x1, y1, x2, y2) = (nums[0], nums[1], nums[2], nums[3], nums[4]);
        let b = PixelBox::new(x1, y1, x2, y2).map_err(|_| {
            (
                lineno,
                format!("degenerate box: need x1 < x2 and y1 < y2, got {x1},{y1},{x2},{y2}"),
            )
        })?;
        match b.clip(height, width) {
            Some(c) => {
                if c != b {
                    log::warn!("line {lineno}: box clipped to {width}x{height} frame");
                }
                out.push(frame, c);
            }
            None => log::warn!("line {lineno}: box lies outside the {width}x{height} frame, dropped"),
        }
    }
    Ok(out)
}

/// Writes annotations in the same CSV layout, with a header.
pub fn save_annotations(path: impl AsRef<Path>, ann: &Annotations) -> Result<()> {
    use std::fmt::Write as _;
    let path = path.as_ref();
    let mut s = String::from("frame,x1,y1,x2,y2\n");
    for a in ann.iter() {
        for b in &a.boxes {
            let _ = writeln!(s, "{},{},{},{},{}", a.frame, b.x1, b.y1, b.x2, b.y2);
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
