//! Optical flow: a dense coarse-to-fine variational solver for the ranking
//! model, and the sparse corner/Lucas-Kanade stack behind the
//! stabilization baseline.

mod corners;
mod dense;
mod lk;
pub(crate) mod pyramid;
mod transform;

pub use corners::{shi_tomasi_corners, Corner, CornerParams, CornerSet};
pub use dense::{dense_flow, DenseFlow, DenseFlowParams};
pub use lk::{lk_track, LkParams, Track};
pub use transform::{estimate_transform, FrameTransform, Match, MotionModel};

use crate::error::{arg_err, Result};
use crate::grid::Grid2D;

/// Per-pixel displacement `(dy, dx)` in pixels from one frame to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    dy: Grid2D,
    dx: Grid2D,
}

impl FlowField {
    pub fn new(dy: Grid2D, dx: Grid2D) -> Result<Self> {
        dy.check_same_dims(&dx)?;
        if !dy.is_finite() || !dx.is_finite() {
            return arg_err("flow displacements must be finite");
        }
        Ok(Self { dy, dx })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            dy: Grid2D::zeros(height, width),
            dx: Grid2D::zeros(height, width),
        }
    }

    /// Every pixel displaced by the same `(dy, dx)`.
    pub fn uniform(height: usize, width: usize, dy: f64, dx: f64) -> Self {
        Self {
            dy: Grid2D::filled(height, width, dy),
            dx: Grid2D::filled(height, width, dx),
        }
    }

    pub fn height(&self) -> usize {
        self.dy.height()
    }

    pub fn width(&self) -> usize {
        self.dy.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dy.dims()
    }

    pub fn dy(&self) -> &Grid2D {
        &self.dy
    }

    pub fn dx(&self) -> &Grid2D {
        &self.dx
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f64, f64) {
        (self.dy.get(y, x), self.dx.get(y, x))
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, (dy, dx): (f64, f64)) {
        self.dy.set(y, x, dy);
        self.dx.set(y, x, dx);
    }

    /// Euclidean length of the displacement at each pixel.
    pub fn magnitude(&self) -> Grid2D {
        self.dy
            .zip_map(&self.dx, f64::hypot)
            .expect("same dims by construction")
    }

    pub fn negate(&self) -> Self {
        Self {
            dy: self.dy.scale(-1.0),
            dx: self.dx.scale(-1.0),
        }
    }

    /// Mean endpoint error against a uniform ground truth, skipping
    /// `border` pixels on every side.
    pub fn mean_endpoint_error(&self, truth: (f64, f64), border: usize) -> f64 {
        let (h, w) = self.dims();
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in border..h.saturating_sub(border) {
            for x in border..w.saturating_sub(border) {
                let (dy, dx) = self.get(y, x);
                sum += (dy - truth.0).hypot(dx - truth.1);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Mean endpoint distance between two fields over the interior.
    pub fn mean_discrepancy(&self, other: &FlowField, border: usize) -> Result<f64> {
        self.dy.check_same_dims(&other.dy)?;
        let (h, w) = self.dims();
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in border..h.saturating_sub(border) {
            for x in border..w.saturating_sub(border) {
                let (a, b) = (self.get(y, x), other.get(y, x));
                sum += (a.0 - b.0).hypot(a.1 - b.1);
                n += 1;
            }
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }
}
