//! Coarse-to-fine refinement of offset pyramids.

use super::{OffsetField, OffsetPyramid};
use crate::error::Result;
use crate::grid::FeatureMap;

/// Factor that converts a displacement in coarse-cell units into
/// fine-cell units under align-corners upsampling: `(fine-1)/(coarse-1)`,
/// or `fine` when the coarse side is a single cell.
pub fn upsample_ratio(coarse: usize, fine: usize) -> f64 {
    if coarse <= 1 {
        fine as f64
    } else {
        (fine - 1) as f64 / (coarse - 1) as f64
    }
}

/// Starting from the coarsest level, each level's refined offsets are
/// upsampled to the next finer level, optionally rescaled to that level's
/// cell units, and added to its raw offsets.
///
/// The result is linear in `raw`.
pub fn refine_offsets(raw: &OffsetPyramid, rescale: bool) -> Result<OffsetPyramid> {
    let n = raw.num_scales();
    let mut refined: Vec<OffsetField> = Vec::with_capacity(n);
    if n == 0 {
        return Ok(OffsetPyramid { levels: refined });
    }
    refined.push(raw.levels[n - 1].clone());
    for k in (0..n - 1).rev() {
        let coarse = refined.last().unwrap();
        let fine = &raw.levels[k];
        let (ch, cw) = coarse.dims();
        let (fh, fw) = fine.dims();
        let (ry, rx) = if rescale {
            (upsample_ratio(ch, fh), upsample_ratio(cw, fw))
        } else {
            (1.0, 1.0)
        };
        let up = coarse.as_map().bilinear_upsample(fh, fw)?;
        let channels = fine
            .as_map()
            .channels()
            .iter()
            .zip(up.channels())
            .enumerate()
            .map(|(c, (f, u))| {
                let r = if c % 2 == 0 { ry } else { rx };
                f.zip_map(u, |a, b| a + r * b)
            })
            .collect::<Result<Vec<_>>>()?;
        refined.push(OffsetField::new(FeatureMap::new(channels)?)?);
    }
    refined.reverse();
    Ok(OffsetPyramid { levels: refined })
}
