//! Gaussian image pyramids and finite-difference derivatives.

use crate::grid::Grid2D;

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Separable 5-tap binomial blur with clamped borders.
pub(crate) fn blur(g: &Grid2D) -> Grid2D {
    let (h, w) = g.dims();
    let horiz = Grid2D::from_fn(h, w, |y, x| {
        BINOMIAL
            .iter()
            .enumerate()
            .map(|(k, c)| c * g.get_clamped(y as isize, x as isize + k as isize - 2))
            .sum()
    });
    Grid2D::from_fn(h, w, |y, x| {
        BINOMIAL
            .iter()
            .enumerate()
            .map(|(k, c)| c * horiz.get_clamped(y as isize + k as isize - 2, x as isize))
            .sum()
    })
}

/// Blur then keep every second pixel; odd sizes round up.
pub(crate) fn downsample(g: &Grid2D) -> Grid2D {
    let b = blur(g);
    let (h, w) = g.dims();
    Grid2D::from_fn(h.div_ceil(2), w.div_ceil(2), |y, x| b.get(2 * y, 2 * x))
}

/// Level 0 is the input; each further level halves the size. Stops early
/// once a level would be smaller than `min_size` on either side.
pub(crate) fn build(g: &Grid2D, levels: usize, min_size: usize) -> Vec<Grid2D> {
    let mut out = vec![g.clone()];
    while out.len() < levels.max(1) {
        let last = out.last().unwrap();
        if last.height().div_ceil(2) < min_size || last.width().div_ceil(2) < min_size {
            break;
        }
        out.push(downsample(last));
    }
    out
}

/// Central differences `(d/dy, d/dx)` with clamped borders.
pub(crate) fn gradients(g: &Grid2D) -> (Grid2D, Grid2D) {
    let gy = Grid2D::from_fn(g.height(), g.width(), |y, x| {
        let (y, x) = (y as isize, x as isize);
        0.5 * (g.get_clamped(y + 1, x) - g.get_clamped(y - 1, x))
    });
    let gx = Grid2D::from_fn(g.height(), g.width(), |y, x| {
        let (y, x) = (y as isize, x as isize);
        0.5 * (g.get_clamped(y, x + 1) - g.get_clamped(y, x - 1))
    });
    (gy, gx)
}
