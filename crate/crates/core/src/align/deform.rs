//! Deformable resampling: every tap of a 3×3 window around cell `(i, j)`
//! is read at its position shifted by the cell's offset, bilinearly, and
//! the taps are combined with the kernel weights. One offset per cell is
//! shared by all taps and all channels.

use super::{ClipFeatureStack, OffsetField, OffsetPyramid};
use crate::error::{arg_err, Result};
use crate::grid::sample::Taps;
use crate::grid::{FeatureMap, Grid2D};

/// Row-major 3×3 tap weights, shared across channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingKernel(pub [f64; 9]);

impl SamplingKernel {
    /// Centre tap 1, the rest 0: pure resampling at the offset position.
    pub fn identity() -> Self {
        let mut w = [0.0; 9];
        w[4] = 1.0;
        Self(w)
    }
}

impl Default for SamplingKernel {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformGrads {
    pub input: FeatureMap,
    pub dy: Grid2D,
    pub dx: Grid2D,
    pub kernel: [f64; 9],
}

fn check(map: &FeatureMap, dy: &Grid2D, dx: &Grid2D) -> Result<()> {
    if dy.dims() != map.dims() || dx.dims() != map.dims() {
        return arg_err(format!(
            "offsets are {}x{}, features are {}x{}",
            dy.height(),
            dy.width(),
            map.height(),
            map.width()
        ));
    }
    Ok(())
}

/// Active taps as `(row offset, col offset, weight)`.
fn active_taps(kernel: &SamplingKernel) -> Vec<(f64, f64, usize, f64)> {
    (0..9)
        .filter(|&k| kernel.0[k] != 0.0)
        .map(|k| ((k / 3) as f64 - 1.0, (k % 3) as f64 - 1.0, k, kernel.0[k]))
        .collect()
}

pub fn deform_map(map: &FeatureMap, dy: &Grid2D, dx: &Grid2D, kernel: &SamplingKernel) -> Result<FeatureMap> {
    check(map, dy, dx)?;
    let (h, w) = map.dims();
    let taps = active_taps(kernel);
    let channels = map
        .channels()
        .iter()
        .map(|src| {
            Grid2D::from_fn(h, w, |i, j| {
                let (oy, ox) = (dy.get(i, j), dx.get(i, j));
                let mut acc = 0.0;
                for &(ty, tx, _, wt) in &taps {
                    acc += wt * src.sample(i as f64 + ty + oy, j as f64 + tx + ox);
                }
                acc
            })
        })
        .collect();
    FeatureMap::new(channels)
}

/// Gradients of `sum(upstream * deform_map(map, dy, dx, kernel))`.
pub fn deform_map_backward(
    map: &FeatureMap,
    dy: &Grid2D,
    dx: &Grid2D,
    kernel: &SamplingKernel,
    upstream: &FeatureMap,
) -> Result<DeformGrads> {
    check(map, dy, dx)?;
    map.check_same_shape(upstream)?;
    let (h, w) = map.dims();
    let mut g_in: Vec<Grid2D> = vec![Grid2D::zeros(h, w); map.num_channels()];
    let mut g_dy = Grid2D::zeros(h, w);
    let mut g_dx = Grid2D::zeros(h, w);
    let mut g_k = [0.0; 9];
    // Every tap is visited, zero-weight ones included, so the kernel
    // gradient is complete.
    for (c, src) in map.channels().iter().enumerate() {
        let up = upstream.channel(c);
        for i in 0..h {
            for j in 0..w {
                let u = up.get(i, j);
                if u == 0.0 {
                    continue;
                }
                let (oy, ox) = (dy.get(i, j), dx.get(i, j));
                let (mut sy, mut sx) = (0.0, 0.0);
                for (k, gk) in g_k.iter_mut().enumerate() {
                    let (ty, tx) = ((k / 3) as f64 - 1.0, (k % 3) as f64 - 1.0);
                    let (py, px) = (i as f64 + ty + oy, j as f64 + tx + ox);
                    let taps = Taps::at(py, px);
                    *gk += u * src.sample(py, px);
                    let wt = kernel.0[k];
                    if wt == 0.0 {
                        continue;
                    }
                    Grid2D::scatter_sample_grad(&mut g_in[c], &taps, u * wt);
                    let (gy, gx) = src.coord_grad(&taps);
                    sy += wt * gy;
                    sx += wt * gx;
                }
                g_dy.values_mut()[i * w + j] += u * sy;
                g_dx.values_mut()[i * w + j] += u * sx;
            }
        }
    }
    Ok(DeformGrads {
        input: FeatureMap::new(g_in)?,
        dy: g_dy,
        dx: g_dx,
        kernel: g_k,
    })
}

fn check_scale(stack: &ClipFeatureStack, offsets: &OffsetPyramid, k: usize) -> Result<()> {
    if k >= stack.num_scales() || k >= offsets.num_scales() {
        return arg_err(format!("scale {k} out of range"));
    }
    let f = offsets.level(k);
    if f.dims() != stack.dims(k) || f.timesteps() != stack.num_timesteps() {
        return arg_err(format!("offsets at scale {k} do not match the clip"));
    }
    Ok(())
}

/// Resamples every timestep of scale `k` at its offsets.
pub fn deformable_sample(
    stack: &ClipFeatureStack,
    offsets: &OffsetPyramid,
    k: usize,
    kernel: &SamplingKernel,
) -> Result<Vec<FeatureMap>> {
    check_scale(stack, offsets, k)?;
    let f = offsets.level(k);
    stack
        .scale(k)
        .iter()
        .enumerate()
        .map(|(t, m)| deform_map(m, f.dy(t), f.dx(t), kernel))
        .collect()
}

/// Gradients of `Σ_t sum(upstream[t] * deformable_sample(..)[t])` with
/// respect to the features of scale `k` and its offset field.
pub fn deformable_sample_backward(
    stack: &ClipFeatureStack,
    offsets: &OffsetPyramid,
    k: usize,
    kernel: &SamplingKernel,
    upstream: &[FeatureMap],
) -> Result<(Vec<FeatureMap>, OffsetField)> {
    check_scale(stack, offsets, k)?;
    if upstream.len() != stack.num_timesteps() {
        return arg_err("one upstream map per timestep required");
    }
    let f = offsets.level(k);
    let mut feats = Vec::with_capacity(upstream.len());
    let mut offs = Vec::with_capacity(2 * upstream.len());
    for (t, (m, up)) in stack.scale(k).iter().zip(upstream).enumerate() {
        let g = deform_map_backward(m, f.dy(t), f.dx(t), kernel, up)?;
        feats.push(g.input);
        offs.push(g.dy);
        offs.push(g.dx);
    }
    Ok((feats, OffsetField::new(FeatureMap::new(offs)?)?))
}
