//! Least-squares rigid motion between two frames from tracked points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tracked point and where it moved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Match {
    pub point: (f64, f64),
    pub displacement: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MotionModel {
    Translation,
    #[default]
    Rigid,
}

impl MotionModel {
    pub fn min_matches(self) -> usize {
        match self {
            MotionModel::Translation => 1,
            MotionModel::Rigid => 3,
        }
    }
}

/// Rotation by `angle` (radians, counter-clockwise in `(x, y)`) about a
/// fixed centre, followed by translation `(ty, tx)`:
/// `q = R (p - c) + c + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct FrameTransform {
    pub ty: f64,
    pub tx: f64,
    pub angle: f64,
}

impl FrameTransform {
    pub const IDENTITY: Self = Self {
        ty: 0.0,
        tx: 0.0,
        angle: 0.0,
    };

    pub fn apply(&self, p: (f64, f64), center: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let (y, x) = (p.0 - center.0, p.1 - center.1);
        (s * x + c * y + center.0 + self.ty, c * x - s * y + center.1 + self.tx)
    }

    /// `|t| + rotation_weight * |angle|`, a displacement-like size.
    pub fn magnitude(&self, rotation_weight: f64) -> f64 {
        self.ty.hypot(self.tx) + rotation_weight * self.angle.abs()
    }
}

/// Multiplier on the median residual beyond which a match is an outlier.
const OUTLIER_FACTOR: f64 = 3.0;
/// Absolute slack so exact fits do not reject round-off.
const OUTLIER_SLACK: f64 = 1e-9;

/// Fits `model` to the matches, drops residuals above three times the
/// median and refits once.
pub fn estimate_transform(matches: &[Match], model: MotionModel, center: (f64, f64)) -> Result<FrameTransform> {
    let needed = model.min_matches();
    if matches.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: matches.len(),
        });
    }
    let first = fit(matches, model, center);
    let residuals: Vec<f64> = matches.iter().map(|m| residual(&first, m, center)).collect();
    let mut sorted = residuals.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let cutoff = OUTLIER_FACTOR * median + OUTLIER_SLACK;
    let inliers: Vec<Match> = matches
        .iter()
        .zip(&residuals)
        .filter(|(_, &r)| r <= cutoff)
        .map(|(m, _)| *m)
        .collect();
    if inliers.len() == matches.len() || inliers.len() < needed {
        return Ok(first);
    }
    Ok(fit(&inliers, model, center))
}

fn residual(t: &FrameTransform, m: &Match, center: (f64, f64)) -> f64 {
    let q = t.apply(m.point, center);
    (q.0 - m.point.0 - m.displacement.0).hypot(q.1 - m.point.1 - m.displacement.1)
}

fn fit(matches: &[Match], model: MotionModel, center: (f64, f64)) -> FrameTransform {
    let n = matches.len() as f64;
    match model {
        MotionModel::Translation => {
            let ty = matches.iter().map(|m| m.displacement.0).sum::<f64>() / n;
            let tx = matches.iter().map(|m| m.displacement.1).sum::<f64>() / n;
            FrameTransform { ty, tx, angle: 0.0 }
        }
        MotionModel::Rigid => {
            // 2-D Procrustes in coordinates relative to the centre.
            let src: Vec<(f64, f64)> = matches
                .iter()
                .map(|m| (m.point.0 - center.0, m.point.1 - center.1))
                .collect();
            let dst: Vec<(f64, f64)> = matches
                .iter()
                .zip(&src)
                .map(|(m, s)| (s.0 + m.displacement.0, s.1 + m.displacement.1))
                .collect();
            let mean = |v: &[(f64, f64)]| {
                (
                    v.iter().map(|p| p.0).sum::<f64>() / n,
                    v.iter().map(|p| p.1).sum::<f64>() / n,
                )
            };
            let (ms, md) = (mean(&src), mean(&dst));
            let (mut dot, mut cross) = (0.0, 0.0);
            for (s, d) in src.iter().zip(&dst) {
                let (sy, sx) = (s.0 - ms.0, s.1 - ms.1);
                let (dy, dx) = (d.0 - md.0, d.1 - md.1);
                dot += sx * dx + sy * dy;
                cross += sx * dy - sy * dx;
            }
            let angle = if dot == 0.0 && cross == 0.0 {
                0.0
            } else {
                cross.atan2(dot)
            };
            let (s, c) = angle.sin_cos();
            let ry = s * ms.1 + c * ms.0;
            let rx = c * ms.1 - s * ms.0;
            FrameTransform {
                ty: md.0 - ry,
                tx: md.1 - rx,
                angle,
            }
        }
    }
}
