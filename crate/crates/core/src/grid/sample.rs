//! Bilinear sampling with zero padding, and its analytic derivatives.

use super::{FeatureMap, Grid2D};
use crate::error::Result;

/// Derivatives of one bilinear sample, already multiplied by the upstream
/// gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrad {
    /// `(y, x, d/dvalue)` for each in-bounds cell that the sample touched.
    /// At most four entries.
    pub cells: Vec<(usize, usize, f64)>,
    pub dy: f64,
    pub dx: f64,
}

/// The four neighbours of a continuous coordinate and their weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub y0: isize,
    pub x0: isize,
    pub fy: f64,
    pub fx: f64,
}

impl Taps {
    #[inline]
    pub fn at(y: f64, x: f64) -> Self {
        let yf = y.floor();
        let xf = x.floor();
        Self {
            y0: yf as isize,
            x0: xf as isize,
            fy: y - yf,
            fx: x - xf,
        }
    }

    /// `(dy, dx, weight)` for the four corners.
    #[inline]
    pub fn corners(&self) -> [(isize, isize, f64); 4] {
        let (fy, fx) = (self.fy, self.fx);
        [
            (0, 0, (1.0 - fy) * (1.0 - fx)),
            (0, 1, (1.0 - fy) * fx),
            (1, 0, fy * (1.0 - fx)),
            (1, 1, fy * fx),
        ]
    }
}

impl Grid2D {
    /// Bilinear interpolation at a continuous `(y, x)`; cells outside the
    /// grid read as zero. Integer in-bounds coordinates return the stored
    /// value exactly.
    #[inline]
    pub fn sample(&self, y: f64, x: f64) -> f64 {
        let t = Taps::at(y, x);
        if t.fy == 0.0 && t.fx == 0.0 {
            return self.get_or_zero(t.y0, t.x0);
        }
        let v00 = self.get_or_zero(t.y0, t.x0);
        let v01 = self.get_or_zero(t.y0, t.x0 + 1);
        let v10 = self.get_or_zero(t.y0 + 1, t.x0);
        let v11 = self.get_or_zero(t.y0 + 1, t.x0 + 1);
        let top = v00 + t.fx * (v01 - v00);
        let bot = v10 + t.fx * (v11 - v10);
        top + t.fy * (bot - top)
    }

    /// Bilinear interpolation with edge clamping instead of zero padding.
    /// Used for image warping, where a dark border would read as motion.
    #[inline]
    pub fn sample_clamped(&self, y: f64, x: f64) -> f64 {
        let y = y.clamp(0.0, (self.height() - 1) as f64);
        let x = x.clamp(0.0, (self.width() - 1) as f64);
        self.sample(y, x)
    }

    /// Partial derivatives of `upstream * self.sample(y, x)`.
    ///
    /// On integer coordinates the one-sided derivative towards `+y`/`+x`
    /// is returned.
    pub fn sample_backward(&self, y: f64, x: f64, upstream: f64) -> SampleGrad {
        let t = Taps::at(y, x);
        let mut cells = Vec::with_capacity(4);
        for (oy, ox, w) in t.corners() {
            let (yy, xx) = (t.y0 + oy, t.x0 + ox);
            if yy >= 0 && xx >= 0 && (yy as usize) < self.height() && (xx as usize) < self.width() {
                cells.push((yy as usize, xx as usize, w * upstream));
            }
        }
        let (dy, dx) = self.coord_grad(&t);
        SampleGrad {
            cells,
            dy: dy * upstream,
            dx: dx * upstream,
        }
    }

    /// d(sample)/dy and d(sample)/dx at precomputed taps.
    #[inline]
    pub(crate) fn coord_grad(&self, t: &Taps) -> (f64, f64) {
        let v00 = self.get_or_zero(t.y0, t.x0);
        let v01 = self.get_or_zero(t.y0, t.x0 + 1);
        let v10 = self.get_or_zero(t.y0 + 1, t.x0);
        let v11 = self.get_or_zero(t.y0 + 1, t.x0 + 1);
        let dy = (1.0 - t.fx) * (v10 - v00) + t.fx * (v11 - v01);
        let dx = (1.0 - t.fy) * (v01 - v00) + t.fy * (v11 - v10);
        (dy, dx)
    }

    /// Adds `upstream * d(sample)/d(values)` into `grad`, which must share
    /// this grid's dimensions.
    #[inline]
    pub(crate) fn scatter_sample_grad(grad: &mut Grid2D, t: &Taps, upstream: f64) {
        let (h, w) = grad.dims();
        for (oy, ox, wt) in t.corners() {
            let (yy, xx) = (t.y0 + oy, t.x0 + ox);
            if wt != 0.0 && yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                let i = yy as usize * w + xx as usize;
                grad.values_mut()[i] += wt * upstream;
            }
        }
    }

    /// Align-corners bilinear resize to a size no smaller than the source.
    pub fn upsample(&self, out_h: usize, out_w: usize) -> Result<Self> {
        let (h, w) = self.dims();
        if out_h < h || out_w < w {
            return crate::error::arg_err(format!(
                "upsample target {out_h}x{out_w} is smaller than source {h}x{w}"
            ));
        }
        let src_y = align_corners_coords(h, out_h);
        let src_x = align_corners_coords(w, out_w);
        Ok(Grid2D::from_fn(out_h, out_w, |i, j| self.sample(src_y[i], src_x[j])))
    }
}

/// Source coordinate of each destination index under align-corners.
/// The endpoints land exactly on the first and last source cells.
pub(crate) fn align_corners_coords(src: usize, dst: usize) -> Vec<f64> {
    (0..dst)
        .map(|i| {
            if src == 1 || dst == 1 {
                0.0
            } else {
                (i * (src - 1)) as f64 / (dst - 1) as f64
            }
        })
        .collect()
}

impl FeatureMap {
    /// Bilinear sample of one channel with zero padding.
    pub fn bilinear_sample(&self, channel: usize, y: f64, x: f64) -> Result<f64> {
        self.check_channel(channel)?;
        Ok(self.channel(channel).sample(y, x))
    }

    pub fn bilinear_sample_backward(&self, channel: usize, y: f64, x: f64, upstream: f64) -> Result<SampleGrad> {
        self.check_channel(channel)?;
        Ok(self.channel(channel).sample_backward(y, x, upstream))
    }

    /// Align-corners upsampling of every channel.
    pub fn bilinear_upsample(&self, out_h: usize, out_w: usize) -> Result<Self> {
        let channels = self
            .channels()
            .iter()
            .map(|g| g.upsample(out_h, out_w))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMap::from_channels_unchecked(channels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::finite_diff_check;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_by_two() -> FeatureMap {
        FeatureMap::from_grid(Grid2D::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap())
    }

    #[test]
    fn sample_examples() {
        let m = two_by_two();
        assert_eq!(m.bilinear_sample(0, 0.0, 0.0).unwrap(), 1.0);
        // Brute force: equal-weight average of the four neighbours.
        let oracle = 0.25 * (1.0 + 2.0 + 3.0 + 4.0);
        assert!((m.bilinear_sample(0, 0.5, 0.5).unwrap() - oracle).abs() < 1e-15);
        assert_eq!(m.bilinear_sample(0, -5.0, -5.0).unwrap(), 0.0);
        assert!(m.bilinear_sample(1, 0.0, 0.0).is_err());
    }

    #[test]
    fn partial_overlap_interpolates_with_zero() {
        let m = two_by_two();
        // Halfway between cell (1,1)=4 and the implicit zero at (1,2).
        assert!((m.bilinear_sample(0, 1.0, 1.5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn backward_on_ramp_and_constant() {
        let ramp = Grid2D::from_fn(5, 5, |_, x| x as f64);
        let g = ramp.sample_backward(2.3, 1.7, 2.0);
        assert!((g.dx - 2.0).abs() < 1e-15);
        assert_eq!(g.dy, 0.0);
        assert!(g.cells.len() <= 4);

        let flat = Grid2D::filled(5, 5, 3.0);
        let g = flat.sample_backward(1.2, 2.9, 1.0);
        assert_eq!((g.dy, g.dx), (0.0, 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = Grid2D::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let (y, x) = (1.37, 2.61);

        // Coordinates.
        let g = grid.sample_backward(y, x, 1.0);
        let rep = finite_diff_check(|p| Ok(grid.sample(p[0], p[1])), &[y, x], &[g.dy, g.dx], 1e-4).unwrap();
        assert!(rep.max_rel_error < 1e-3, "{rep:?}");

        // Values.
        let mut analytic = vec![0.0; 16];
        for &(yy, xx, d) in &g.cells {
            analytic[yy * 4 + xx] = d;
        }
        let rep = finite_diff_check(
            |p| Ok(Grid2D::from_vec_unchecked(4, 4, p.to_vec()).sample(y, x)),
            grid.values(),
            &analytic,
            1e-4,
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-3, "{rep:?}");
    }

    #[test]
    fn upsample_examples() {
        let one = Grid2D::filled(1, 1, 7.0);
        assert_eq!(one.upsample(3, 3).unwrap(), Grid2D::filled(3, 3, 7.0));

        let col = Grid2D::from_rows(&[[1.0], [3.0]]).unwrap();
        let up = col.upsample(3, 1).unwrap();
        // Brute force: the middle target maps to source y = 0.5.
        let oracle = [1.0, 0.5 * 1.0 + 0.5 * 3.0, 3.0];
        assert_eq!(up.values(), &oracle);

        let g = Grid2D::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(g.upsample(2, 2).unwrap(), g);
        assert!(g.upsample(1, 2).is_err());
    }

    proptest! {
        #[test]
        fn integer_coords_are_exact(vals in proptest::collection::vec(-10.0f64..10.0, 12), y in 0usize..3, x in 0usize..4) {
            let g = Grid2D::new(3, 4, vals).unwrap();
            prop_assert_eq!(g.sample(y as f64, x as f64), g.get(y, x));
        }

        #[test]
        fn sample_is_linear_in_values(
            a in proptest::collection::vec(-5.0f64..5.0, 9),
            b in proptest::collection::vec(-5.0f64..5.0, 9),
            alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
            y in -1.5f64..3.5, x in -1.5f64..3.5,
        ) {
            let ga = Grid2D::new(3, 3, a).unwrap();
            let gb = Grid2D::new(3, 3, b).unwrap();
            let combo = ga.zip_map(&gb, |u, v| alpha * u + beta * v).unwrap();
            let lhs = combo.sample(y, x);
            let rhs = alpha * ga.sample(y, x) + beta * gb.sample(y, x);
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn upsample_constant_stays_constant(c in -100.0f64..100.0, h in 1usize..5, w in 1usize..5, dh in 0usize..6, dw in 0usize..6) {
            let up = Grid2D::filled(h, w, c).upsample(h + dh, w + dw).unwrap();
            for &v in up.values() {
                prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
        }
    }
}
