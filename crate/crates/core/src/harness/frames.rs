use std::path::{Path, PathBuf};

use super::netpbm::{self, Image};
use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// An ordered run of equally sized grayscale frames with values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    id: String,
    frames: Vec<Grid2D>,
    /// Informational only.
    pub fps: Option<f64>,
}

impl FrameSequence {
    pub fn new(id: impl Into<String>, frames: Vec<Grid2D>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Argument("a frame sequence needs at least one frame".into()));
        };
        let dims = first.dims();
        if let Some(i) = frames.iter().position(|f| f.dims() != dims) {
            return Err(Error::Argument(format!(
                "frame {i} is {}x{}, expected {}x{}",
                frames[i].height(),
                frames[i].width(),
                dims.0,
                dims.1
            )));
        }
        Ok(Self {
            id: id.into(),
            frames,
            fps: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frames(&self) -> &[Grid2D] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn frame(&self, i: usize) -> &Grid2D {
        &self.frames[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Numeric index embedded in a file stem such as `frame_0012`: the last
/// run of digits.
fn frame_index(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map(|i| i + 1)
        .unwrap_or(0);
    stem[start..end].parse().ok()
}

fn is_frame_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pgm" | "ppm" | "pnm")
    )
}

/// Loads every numbered PGM/PPM file in `dir`, ordered by index.
///
/// Colour frames are reduced to luma. A gap in the numbering is logged and
/// otherwise ignored.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || !is_frame_file(&path) {
            continue;
        }
        match frame_index(&path) {
            Some(i) => files.push((i, path)),
            None => log::warn!("skipping unnumbered file {}", path.display()),
        }
    }
    if files.is_empty() {
        return Err(Error::format(dir, None, "no numbered .pgm/.ppm frames found"));
    }
    files.sort();
    for pair in files.windows(2) {
        if pair[1].0 == pair[0].0 {
            return Err(Error::format(
                &pair[1].1,
                None,
                format!("duplicate frame index {}", pair[0].0),
            ));
        }
        if pair[1].0 != pair[0].0 + 1 {
            log::warn!(
                "gap in frame numbering in {}: {} is followed by {}",
                dir.display(),
                pair[0].0,
                pair[1].0
            );
        }
    }

    let mut frames = Vec::with_capacity(files.len());
    for (_, path) in &files {
        let img = netpbm::read(path)?;
        let grid = img.to_luma();
        if let Some(first) = frames.first() {
            let first: &Grid2D = first;
            if first.dims() != grid.dims() {
                return Err(Error::format(
                    path,
                    None,
                    format!(
                        "frame is {}x{} but earlier frames are {}x{}",
                        grid.height(),
                        grid.width(),
                        first.height(),
                        first.width()
                    ),
                ));
            }
        }
        frames.push(grid);
    }
    let id = dir.file_name().and_then(|s| s.to_str()).unwrap_or("video").to_string();
    FrameSequence::new(id, frames)
}

/// Writes frames as `000.pgm`, `001.pgm`, ... (wider padding for long
/// sequences). Values are clamped to `[0,1]` and quantized.
pub fn save_frames(seq: &FrameSequence, dir: impl AsRef<Path>, depth: BitDepth) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let digits = seq.len().saturating_sub(1).to_string().len().max(3);
    let mut paths = Vec::with_capacity(seq.len());
    for (i, frame) in seq.frames().iter().enumerate() {
        let path = dir.join(format!("{i:0digits$}.pgm"));
        netpbm::write(&path, &Image::from_unit_grid(frame, depth.maxval()))?;
        paths.push(path);
    }
    Ok(paths)
}
