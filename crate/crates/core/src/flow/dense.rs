//! Coarse-to-fine variational flow: a Horn-Schunck energy (quadratic data
//! and smoothness terms) solved on each level of an image pyramid, with
//! the second frame re-warped by the current estimate before each solve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pyramid, FlowField};
use crate::error::Result;
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenseFlowParams {
    /// Pyramid levels including full resolution.
    pub levels: usize,
    /// Jacobi sweeps per warp.
    pub iterations: usize,
    /// Smoothness weight `alpha` on `[0,1]` intensities; the energy uses
    /// `alpha^2 |grad u|^2`.
    pub smoothness: f64,
    /// Warp-and-resolve rounds per level.
    pub warps: usize,
}

impl Default for DenseFlowParams {
    fn default() -> Self {
        Self {
            levels: 4,
            iterations: 100,
            smoothness: DEFAULT_SMOOTHNESS,
            warps: 2,
        }
    }
}

pub const DEFAULT_SMOOTHNESS: f64 = 0.3;

/// Levels smaller than this on either side are not built.
const MIN_LEVEL_SIZE: usize = 8;

/// Below this gradient magnitude a frame counts as textureless.
const TEXTURE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseFlow {
    pub field: FlowField,
    /// Both frames were textureless, so the returned zero flow carries no
    /// information.
    pub degenerate: bool,
}

/// Dense flow from `prev` to `next`: `next(p + flow(p)) ≈ prev(p)`.
pub fn dense_flow(prev: &Grid2D, next: &Grid2D, params: &DenseFlowParams) -> Result<DenseFlow> {
    prev.check_same_dims(next)?;
    let (h, w) = prev.dims();
    if is_textureless(prev) && is_textureless(next) {
        return Ok(DenseFlow {
            field: FlowField::zeros(h, w),
            degenerate: true,
        });
    }

    let p0 = pyramid::build(prev, params.levels, MIN_LEVEL_SIZE);
    let p1 = pyramid::build(next, params.levels, MIN_LEVEL_SIZE);
    let alpha2 = params.smoothness * params.smoothness;

    let mut u = Grid2D::zeros(p0.last().unwrap().height(), p0.last().unwrap().width());
    let mut v = u.clone();
    for level in (0..p0.len()).rev() {
        let (lh, lw) = p0[level].dims();
        if u.dims() != (lh, lw) {
            let (sy, sx) = (lh as f64 / u.height() as f64, lw as f64 / u.width() as f64);
            u = resize(&u, lh, lw).scale(sx);
            v = resize(&v, lh, lw).scale(sy);
        }
        for _ in 0..params.warps.max(1) {
            let (nu, nv) = solve_level(&p0[level], &p1[level], &u, &v, alpha2, params.iterations);
            u = nu;
            v = nv;
        }
    }
    Ok(DenseFlow {
        field: FlowField::new(v, u)?,
        degenerate: false,
    })
}

fn is_textureless(g: &Grid2D) -> bool {
    g.max() - g.min() < TEXTURE_EPS
}

/// Bilinear resize that maps pixel centres onto pixel centres.
fn resize(g: &Grid2D, out_h: usize, out_w: usize) -> Grid2D {
    let (h, w) = g.dims();
    let ry = h as f64 / out_h as f64;
    let rx = w as f64 / out_w as f64;
    Grid2D::from_fn(out_h, out_w, |y, x| {
        g.sample_clamped((y as f64 + 0.5) * ry - 0.5, (x as f64 + 0.5) * rx - 0.5)
    })
}

/// One linearised solve around the current flow `(u, v)` = `(dx, dy)`.
fn solve_level(i0: &Grid2D, i1: &Grid2D, u0: &Grid2D, v0: &Grid2D, alpha2: f64, iterations: usize) -> (Grid2D, Grid2D) {
    let (h, w) = i0.dims();
    let warped = Grid2D::from_fn(h, w, |y, x| {
        i1.sample_clamped(y as f64 + v0.get(y, x), x as f64 + u0.get(y, x))
    });
    let (gy0, gx0) = pyramid::gradients(i0);
    let (gy1, gx1) = pyramid::gradients(&warped);
    let n = h * w;
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut it = vec![0.0; n];
    for k in 0..n {
        ix[k] = 0.5 * (gx0.values()[k] + gx1.values()[k]);
        iy[k] = 0.5 * (gy0.values()[k] + gy1.values()[k]);
        it[k] = warped.values()[k] - i0.values()[k];
    }

    let mut u = u0.values().to_vec();
    let mut v = v0.values().to_vec();
    let mut nu = vec![0.0; n];
    let mut nv = vec![0.0; n];
    let (u0, v0) = (u0.values(), v0.values());
    for _ in 0..iterations {
        nu.par_chunks_mut(w)
            .zip(nv.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, (ru, rv))| {
                for x in 0..w {
                    let k = y * w + x;
                    let ub = neighbour_mean(&u, h, w, y, x);
                    let vb = neighbour_mean(&v, h, w, y, x);
                    // Residual of the linearised constancy equation at the
                    // smoothed estimate, in increments relative to (u0, v0).
                    let r = ix[k] * (ub - u0[k]) + iy[k] * (vb - v0[k]) + it[k];
                    let d = alpha2 + ix[k] * ix[k] + iy[k] * iy[k];
                    ru[x] = ub - ix[k] * r / d;
                    rv[x] = vb - iy[k] * r / d;
                }
            });
        std::mem::swap(&mut u, &mut nu);
        std::mem::swap(&mut v, &mut nv);
    }
    (Grid2D::from_vec_unchecked(h, w, u), Grid2D::from_vec_unchecked(h, w, v))
}

/// Mean of the 4-neighbourhood with reflecting (Neumann) borders.
#[inline]
fn neighbour_mean(f: &[f64], h: usize, w: usize, y: usize, x: usize) -> f64 {
    let up = if y > 0 { y - 1 } else { y };
    let down = if y + 1 < h { y + 1 } else { y };
    let left = if x > 0 { x - 1 } else { x };
    let right = if x + 1 < w { x + 1 } else { x };
    0.25 * (f[up * w + x] + f[down * w + x] + f[y * w + left] + f[y * w + right])
}
