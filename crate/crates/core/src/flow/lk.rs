//! Pyramidal Lucas-Kanade point tracking (Bouguet's formulation).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pyramid, CornerSet};
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LkParams {
    pub levels: usize,
    /// Odd side length of the integration window.
    pub window: usize,
    pub iterations: usize,
    /// A point has converged once an update is shorter than this (pixels).
    pub epsilon: f64,
    /// Minimum eigenvalue of the window-averaged gradient matrix below
    /// which a point is considered untrackable.
    pub min_eigen: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            levels: 3,
            window: 15,
            iterations: 20,
            epsilon: 0.01,
            min_eigen: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Track {
    pub point: (f64, f64),
    pub displacement: (f64, f64),
    pub converged: bool,
}

struct Level {
    prev: Grid2D,
    next: Grid2D,
    gy: Grid2D,
    gx: Grid2D,
}

/// Tracks `points` from `prev` into `next`. The returned displacement `d`
/// satisfies `next(p + d) ≈ prev(p)`.
pub fn lk_track(prev: &Grid2D, next: &Grid2D, points: &CornerSet, params: &LkParams) -> Vec<Track> {
    assert_eq!(prev.dims(), next.dims(), "frames must share dimensions");
    let min_size = params.window.max(3);
    let p0 = pyramid::build(prev, params.levels, min_size);
    let p1 = pyramid::build(next, params.levels, min_size);
    let levels: Vec<Level> = p0
        .into_iter()
        .zip(p1)
        .map(|(prev, next)| {
            let (gy, gx) = pyramid::gradients(&prev);
            Level { prev, next, gy, gx }
        })
        .collect();

    points
        .0
        .par_iter()
        .map(|c| track_point(&levels, (c.y as f64, c.x as f64), params))
        .collect()
}

fn track_point(levels: &[Level], point: (f64, f64), params: &LkParams) -> Track {
    let r = (params.window / 2) as isize;
    let area = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut guess = (0.0, 0.0);
    let mut converged = false;
    let mut trackable = true;

    for (li, lvl) in levels.iter().enumerate().rev() {
        let s = (1u64 << li) as f64;
        let (py, px) = (point.0 / s, point.1 / s);

        // Spatial gradient matrix over the window in the previous frame.
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (y, x) = (py + dy as f64, px + dx as f64);
                let ix = lvl.gx.sample_clamped(y, x);
                let iy = lvl.gy.sample_clamped(y, x);
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
            }
        }
        let det = gxx * gyy - gxy * gxy;
        let min_eig = 0.5 * (gxx + gyy) - (0.25 * (gxx - gyy).powi(2) + gxy * gxy).sqrt();
        if min_eig / area < params.min_eigen || det <= 0.0 {
            trackable = false;
            break;
        }

        let mut nu = (0.0, 0.0);
        converged = false;
        for _ in 0..params.iterations {
            let (mut by, mut bx) = (0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (y, x) = (py + dy as f64, px + dx as f64);
                    let diff =
                        lvl.prev.sample_clamped(y, x) - lvl.next.sample_clamped(y + guess.0 + nu.0, x + guess.1 + nu.1);
                    bx += diff * lvl.gx.sample_clamped(y, x);
                    by += diff * lvl.gy.sample_clamped(y, x);
                }
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            nu = (nu.0 + ey, nu.1 + ex);
            if ey.hypot(ex) < params.epsilon {
                converged = true;
                break;
            }
        }
        if li > 0 {
            guess = (2.0 * (guess.0 + nu.0), 2.0 * (guess.1 + nu.1));
        } else {
            guess = (guess.0 + nu.0, guess.1 + nu.1);
        }
    }

    let (h, w) = levels[0].prev.dims();
    let (ey, ex) = (point.0 + guess.0, point.1 + guess.1);
    // Windows reaching past the border see clamped pixels and are unreliable.
    let rf = r as f64;
    let inside = |y: f64, x: f64| y >= rf && x >= rf && y <= (h - 1) as f64 - rf && x <= (w - 1) as f64 - rf;
    let inside = inside(point.0, point.1) && inside(ey, ex);
    let ok = trackable && converged && inside && guess.0.is_finite() && guess.1.is_finite();
    Track {
        point,
        displacement: if ok { guess } else { (0.0, 0.0) },
        converged: ok,
    }
}
