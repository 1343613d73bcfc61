//! Camera-motion ranking.
//!
//! Per consecutive frame pair, dense flow is computed, flow inside actor
//! boxes is zeroed, and the mean flow magnitude over the frame is stored.
//! The rank of a video is the summed absolute change of that series,
//! divided by the number of frames: smooth camera motion scores near zero,
//! jerky motion scores high.

mod pipeline;
mod report;

pub use pipeline::{
    rank_video_flow, rank_video_stabilize, FlowRankParams, FlowRanking, PairFlag, PairIssue, StabilizeParams,
    StabilizeRanking,
};
pub use report::{build_report, HistogramBin, Method, RankingReport, RankingRow, DEFAULT_BINS};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::flow::FlowField;

/// Half-open pixel rectangle: covers `x1 <= x < x2`, `y1 <= y < y2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl PixelBox {
    pub fn new(x1: usize, y1: usize, x2: usize, y2: usize) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return arg_err(format!("empty box ({x1},{y1})-({x2},{y2})"));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    #[inline]
    pub fn contains(&self, y: usize, x: usize) -> bool {
        self.x1 <= x && x < self.x2 && self.y1 <= y && y < self.y2
    }

    /// Intersection with a `height × width` frame; `None` if nothing is left.
    pub fn clip(&self, height: usize, width: usize) -> Option<Self> {
        let b = Self {
            x1: self.x1.min(width),
            y1: self.y1.min(height),
            x2: self.x2.min(width),
            y2: self.y2.min(height),
        };
        (b.x1 < b.x2 && b.y1 < b.y2).then_some(b)
    }

    pub fn area(&self) -> usize {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

/// Boxes annotated on one frame.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub frame: usize,
    pub boxes: Vec<PixelBox>,
}

/// All box annotations of a video, keyed by frame index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Annotations {
    by_frame: BTreeMap<usize, BoxAnnotation>,
}

impl Annotations {
    pub fn push(&mut self, frame: usize, b: PixelBox) {
        self.by_frame
            .entry(frame)
            .or_insert_with(|| BoxAnnotation {
                frame,
                boxes: Vec::new(),
            })
            .boxes
            .push(b);
    }

    pub fn for_frame(&self, frame: usize) -> &[PixelBox] {
        self.by_frame.get(&frame).map(|a| a.boxes.as_slice()).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.by_frame.is_empty()
    }

    /// Total number of boxes.
    pub fn len(&self) -> usize {
        self.by_frame.values().map(|a| a.boxes.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BoxAnnotation> {
        self.by_frame.values()
    }
}

/// Zeroes the displacement at every pixel inside any of `boxes`.
pub fn mask_flow(flow: &FlowField, boxes: &[PixelBox]) -> FlowField {
    let mut out = flow.clone();
    let (h, w) = flow.dims();
    for b in boxes.iter().filter_map(|b| b.clip(h, w)) {
        for y in b.y1..b.y2 {
            for x in b.x1..b.x2 {
                out.set(y, x, (0.0, 0.0));
            }
        }
    }
    out
}

/// What the per-frame mean flow magnitude is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Denominator {
    /// Every pixel of the frame; masked pixels count as zero.
    #[default]
    All,
    /// Only pixels outside every box.
    Unmasked,
}

/// Mean Euclidean flow magnitude over all `H·W` pixels.
pub fn frame_flow_magnitude(masked: &FlowField) -> f64 {
    let (h, w) = masked.dims();
    masked.magnitude().sum() / (h * w) as f64
}

/// Masks `flow` with `boxes` and averages its magnitude under the chosen
/// denominator. A fully masked frame scores zero.
pub fn masked_flow_magnitude(flow: &FlowField, boxes: &[PixelBox], denominator: Denominator) -> f64 {
    let masked = mask_flow(flow, boxes);
    match denominator {
        Denominator::All => frame_flow_magnitude(&masked),
        Denominator::Unmasked => {
            let (h, w) = flow.dims();
            let covered = (0..h)
                .flat_map(|y| (0..w).map(move |x| (y, x)))
                .filter(|&(y, x)| boxes.iter().any(|b| b.contains(y, x)))
                .count();
            let free = h * w - covered;
            if free == 0 {
                0.0
            } else {
                masked.magnitude().sum() / free as f64
            }
        }
    }
}

/// `(1 / nframes) · Σ |flow(i+1) − flow(i)|`; zero when fewer than two
/// values are given.
pub fn rank_from_series(series: &[f64], nframes: usize) -> f64 {
    if series.len() < 2 || nframes == 0 {
        return 0.0;
    }
    let tv: f64 = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    tv / nframes as f64
}

/// Per-pair mean masked flow magnitudes of one video.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionProfile {
    pub video: String,
    /// One entry per consecutive frame pair.
    pub flow: Vec<f64>,
    pub nframes: usize,
}

impl MotionProfile {
    pub fn new(video: impl Into<String>, flow: Vec<f64>, nframes: usize) -> Result<Self> {
        if nframes == 0 || flow.len() != nframes - 1 {
            return arg_err(format!(
                "a {nframes}-frame video has {} pairs, got {} flow values",
                nframes.saturating_sub(1),
                flow.len()
            ));
        }
        if flow.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return arg_err("flow magnitudes must be finite and nonnegative");
        }
        Ok(Self {
            video: video.into(),
            flow,
            nframes,
        })
    }
}

pub fn compute_rank(profile: &MotionProfile) -> f64 {
    rank_from_series(&profile.flow, profile.nframes)
}
