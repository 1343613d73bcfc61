//! Shi-Tomasi "good features to track".

use serde::{Deserialize, Serialize};

use super::pyramid;
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CornerParams {
    pub max_corners: usize,
    /// Fraction of the strongest response below which candidates are dropped.
    pub quality_level: f64,
    /// Minimum Euclidean distance between returned corners, in pixels.
    pub min_distance: f64,
    /// Side of the square window the structure tensor is summed over (odd).
    pub block_size: usize,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            max_corners: 200,
            quality_level: 0.01,
            min_distance: 8.0,
            block_size: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corner {
    pub y: usize,
    pub x: usize,
    /// Smaller eigenvalue of the structure tensor.
    pub score: f64,
}

/// Corners sorted by descending score.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CornerSet(pub Vec<Corner>);

impl CornerSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Corner> {
        self.0.iter()
    }
}

/// Minimum-eigenvalue response of the windowed structure tensor. Pixels
/// whose window would leave the frame score zero.
pub(crate) fn min_eigen_response(frame: &Grid2D, block_size: usize) -> Grid2D {
    let (h, w) = frame.dims();
    let (gy, gx) = pyramid::gradients(frame);
    let r = (block_size.max(1) / 2) as isize;
    // Gradients at the outermost pixels are one-sided; keep windows clear.
    let margin = r + 1;
    Grid2D::from_fn(h, w, |y, x| {
        let (yi, xi) = (y as isize, x as isize);
        if yi < margin || xi < margin || yi >= h as isize - margin || xi >= w as isize - margin {
            return 0.0;
        }
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (yy, xx) = ((yi + dy) as usize, (xi + dx) as usize);
                let (iy, ix) = (gy.get(yy, xx), gx.get(yy, xx));
                a += ix * ix;
                b += ix * iy;
                c += iy * iy;
            }
        }
        let half_tr = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (half_tr - disc).max(0.0)
    })
}

pub fn shi_tomasi_corners(frame: &Grid2D, params: &CornerParams) -> CornerSet {
    let (h, w) = frame.dims();
    if h < 3 || w < 3 || params.max_corners == 0 {
        return CornerSet::default();
    }
    let resp = min_eigen_response(frame, params.block_size);
    let peak = resp.max();
    if peak <= 0.0 {
        return CornerSet::default();
    }
    let threshold = params.quality_level * peak;

    let mut candidates = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let s = resp.get(y, x);
            if s <= 0.0 || s < threshold {
                continue;
            }
            let is_max =
                (-1isize..=1).all(|dy| (-1isize..=1).all(|dx| resp.get_or_zero(y as isize + dy, x as isize + dx) <= s));
            if is_max {
                candidates.push(Corner { y, x, score: s });
            }
        }
    }
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then((a.y, a.x).cmp(&(b.y, b.x))));

    let min_d2 = params.min_distance * params.min_distance;
    let mut kept: Vec<Corner> = Vec::new();
    for c in candidates {
        if kept.len() == params.max_corners {
            break;
        }
        let far_enough = kept.iter().all(|k| {
            let dy = k.y as f64 - c.y as f64;
            let dx = k.x as f64 - c.x as f64;
            dy * dy + dx * dx >= min_d2
        });
        if far_enough {
            kept.push(c);
        }
    }
    CornerSet(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Structure-tensor scan written out longhand: the brute-force oracle.
    fn oracle_response(f: &Grid2D, y: usize, x: usize) -> f64 {
        let d = |yy: isize, xx: isize| {
            let gx = 0.5 * (f.get_clamped(yy, xx + 1) - f.get_clamped(yy, xx - 1));
            let gy = 0.5 * (f.get_clamped(yy + 1, xx) - f.get_clamped(yy - 1, xx));
            (gy, gx)
        };
        let mut m = [[0.0; 2]; 2];
        for yy in y as isize - 1..=y as isize + 1 {
            for xx in x as isize - 1..=x as isize + 1 {
                let (gy, gx) = d(yy, xx);
                m[0][0] += gx * gx;
                m[0][1] += gx * gy;
                m[1][1] += gy * gy;
            }
        }
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
        0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt()
    }

    fn square() -> Grid2D {
        Grid2D::from_fn(32, 32, |y, x| {
            if (10..20).contains(&y) && (10..20).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn constant_frame_has_no_corners() {
        let c = shi_tomasi_corners(&Grid2D::filled(16, 16, 0.4), &CornerParams::default());
        assert!(c.is_empty());
    }

    #[test]
    fn response_matches_oracle() {
        let f = square();
        let r = min_eigen_response(&f, 3);
        for y in 2..30 {
            for x in 2..30 {
                assert!((r.get(y, x) - oracle_response(&f, y, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn square_has_four_corners_at_vertices() {
        let params = CornerParams {
            max_corners: 10,
            quality_level: 0.1,
            min_distance: 4.0,
            block_size: 3,
        };
        let c = shi_tomasi_corners(&square(), &params);
        assert_eq!(c.len(), 4, "{c:?}");
        // The square occupies rows/cols 10..=19.
        for v in [(10.0, 10.0), (10.0, 19.0), (19.0, 10.0), (19.0, 19.0)] {
            let hit = c
                .iter()
                .any(|k| (k.y as f64 - v.0).abs() <= 1.0 && (k.x as f64 - v.1).abs() <= 1.0);
            assert!(hit, "no corner near {v:?}: {c:?}");
        }
    }

    #[test]
    fn checkerboard_interior_intersections() {
        let cell = 8;
        let n = 6;
        let f = Grid2D::from_fn(cell * n, cell * n, |y, x| ((y / cell + x / cell) % 2) as f64);
        let params = CornerParams {
            max_corners: 500,
            quality_level: 0.1,
            min_distance: 4.0,
            block_size: 3,
        };
        let c = shi_tomasi_corners(&f, &params);
        assert_eq!(c.len(), (n - 1) * (n - 1), "{c:?}");
        for k in c.iter() {
            let near = |v: usize| {
                let off = v % cell;
                off == 0 || off == cell - 1
            };
            assert!(near(k.y) && near(k.x), "{k:?}");
        }
    }

    #[test]
    fn respects_min_distance_and_order() {
        let f = crate::harness::synth::texture(9, 64, 64, 2);
        let params = CornerParams {
            min_distance: 6.0,
            ..Default::default()
        };
        let c = shi_tomasi_corners(&f, &params);
        assert!(c.len() > 5);
        for (i, a) in c.iter().enumerate() {
            for b in &c.0[i + 1..] {
                assert!(a.score >= b.score);
                let d = ((a.y as f64 - b.y as f64).powi(2) + (a.x as f64 - b.x as f64).powi(2)).sqrt();
                assert!(d >= 6.0);
            }
        }
    }
}
