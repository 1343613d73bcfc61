//! Whole-video ranking: the flow-based ranking and the stabilization
//! baseline it is compared against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{masked_flow_magnitude, rank_from_series, Annotations, Denominator, MotionProfile};
use crate::error::{arg_err, Error, Result};
use crate::flow::{
    dense_flow, estimate_transform, lk_track, shi_tomasi_corners, CornerParams, DenseFlowParams, FrameTransform,
    LkParams, Match, MotionModel,
};
use crate::harness::FrameSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairIssue {
    /// Both frames were textureless; the flow is zero by fiat.
    DegenerateFlow,
    /// Too few tracked points to fit a transform; the pair contributes 0.
    InsufficientMatches,
}

/// A problem with the frame pair `(pair, pair + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFlag {
    pub pair: usize,
    pub issue: PairIssue,
}

impl std::fmt::Display for PairFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match self.issue {
            PairIssue::DegenerateFlow => "degenerate_flow",
            PairIssue::InsufficientMatches => "insufficient_matches",
        };
        write!(f, "pair {}: {what}", self.pair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowRankParams {
    pub flow: DenseFlowParams,
    pub denominator: Denominator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRanking {
    pub profile: MotionProfile,
    pub rank: f64,
    pub flags: Vec<PairFlag>,
}

/// Dense flow, box masking and mean magnitude for every consecutive pair,
/// then the moving-difference rank. Pair `t` is masked with the boxes of
/// frame `t`.
pub fn rank_video_flow(frames: &FrameSequence, boxes: &Annotations, params: &FlowRankParams) -> Result<FlowRanking> {
    if frames.len() < 2 {
        return arg_err(format!("ranking needs at least 2 frames, got {}", frames.len()));
    }
    let per_pair: Vec<(f64, bool)> = (0..frames.len() - 1)
        .into_par_iter()
        .map(|t| {
            let r = dense_flow(frames.frame(t), frames.frame(t + 1), &params.flow)?;
            let m = masked_flow_magnitude(&r.field, boxes.for_frame(t), params.denominator);
            Ok((m, r.degenerate))
        })
        .collect::<Result<_>>()?;

    let flags = per_pair
        .iter()
        .enumerate()
        .filter(|(_, (_, d))| *d)
        .map(|(pair, _)| PairFlag {
            pair,
            issue: PairIssue::DegenerateFlow,
        })
        .collect();
    let profile = MotionProfile::new(frames.id(), per_pair.iter().map(|p| p.0).collect(), frames.len())?;
    let rank = rank_from_series(&profile.flow, profile.nframes);
    Ok(FlowRanking { profile, rank, flags })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilizeParams {
    pub corners: CornerParams,
    pub lk: LkParams,
    pub model: MotionModel,
    /// Pixels per radian of rotation in the transform magnitude. `None`
    /// uses the frame diagonal over pi.
    pub rotation_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizeRanking {
    pub rank: f64,
    /// Identity for flagged pairs.
    pub transforms: Vec<FrameTransform>,
    pub magnitudes: Vec<f64>,
    pub flags: Vec<PairFlag>,
    pub nframes: usize,
}

/// Sum of per-pair rigid-transform magnitudes divided by the frame count.
pub fn rank_video_stabilize(frames: &FrameSequence, params: &StabilizeParams) -> Result<StabilizeRanking> {
    if frames.len() < 2 {
        return arg_err(format!("ranking needs at least 2 frames, got {}", frames.len()));
    }
    let (h, w) = frames.dims();
    let center = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let weight = params
        .rotation_weight
        .unwrap_or_else(|| (h as f64).hypot(w as f64) / std::f64::consts::PI);

    let per_pair: Vec<Option<FrameTransform>> = (0..frames.len() - 1)
        .into_par_iter()
        .map(|t| {
            let (a, b) = (frames.frame(t), frames.frame(t + 1));
            let corners = shi_tomasi_corners(a, &params.corners);
            let matches: Vec<Match> = lk_track(a, b, &corners, &params.lk)
                .into_iter()
                .filter(|tr| tr.converged)
                .map(|tr| Match {
                    point: tr.point,
                    displacement: tr.displacement,
                })
                .collect();
            match estimate_transform(&matches, params.model, center) {
                Ok(tf) => Ok(Some(tf)),
                Err(Error::InsufficientData { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut flags = Vec::new();
    let mut transforms = Vec::with_capacity(per_pair.len());
    for (pair, tf) in per_pair.into_iter().enumerate() {
        match tf {
            Some(tf) => transforms.push(tf),
            None => {
                flags.push(PairFlag {
                    pair,
                    issue: PairIssue::InsufficientMatches,
                });
                transforms.push(FrameTransform::IDENTITY);
            }
        }
    }
    let magnitudes: Vec<f64> = transforms.iter().map(|t| t.magnitude(weight)).collect();
    let rank = magnitudes.iter().sum::<f64>() / frames.len() as f64;
    Ok(StabilizeRanking {
        rank,
        transforms,
        magnitudes,
        flags,
        nframes: frames.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{generate_synth, CameraPath, SynthSpec};

    #[test]
    fn two_identical_frames_rank_zero() {
        let v = generate_synth(&SynthSpec::new(1, 48, 48, 2, CameraPath::Static)).unwrap();
        let r = rank_video_flow(&v.frames, &v.boxes, &FlowRankParams::default()).unwrap();
        assert_eq!(r.rank, 0.0);
        assert_eq!(r.profile.flow, vec![0.0]);
    }

    #[test]
    fn needs_two_frames() {
        let v = generate_synth(&SynthSpec::new(1, 16, 16, 1, CameraPath::Static)).unwrap();
        assert!(rank_video_flow(&v.frames, &v.boxes, &FlowRankParams::default()).is_err());
        assert!(rank_video_stabilize(&v.frames, &StabilizeParams::default()).is_err());
    }

    #[test]
    fn jitter_outranks_equal_speed_pan() {
        // Jitter of amplitude 2 averages 1 px/frame, like a pan of 1.
        let jit = generate_synth(&SynthSpec::new(8, 64, 64, 8, CameraPath::Jitter { amplitude: 2.0 })).unwrap();
        let pan = generate_synth(&SynthSpec::new(
            8,
            64,
            64,
            8,
            CameraPath::Pan {
                speed: 1.0,
                direction_deg: 0.0,
            },
        ))
        .unwrap();
        let p = FlowRankParams::default();
        let rj = rank_video_flow(&jit.frames, &jit.boxes, &p).unwrap().rank;
        let rp = rank_video_flow(&pan.frames, &pan.boxes, &p).unwrap().rank;
        assert!(rj > rp, "jitter {rj} vs pan {rp}");
    }

    #[test]
    fn stabilize_static_and_pan() {
        let still = generate_synth(&SynthSpec::new(2, 80, 80, 4, CameraPath::Static)).unwrap();
        let r = rank_video_stabilize(&still.frames, &StabilizeParams::default()).unwrap();
        assert!(r.rank.abs() < 1e-3 && r.flags.is_empty());

        let n = 6;
        let pan = generate_synth(&SynthSpec::new(
            2,
            80,
            80,
            n,
            CameraPath::Pan {
                speed: 3.0,
                direction_deg: 0.0,
            },
        ))
        .unwrap();
        let r = rank_video_stabilize(&pan.frames, &StabilizeParams::default()).unwrap();
        let expected = 3.0 * (n - 1) as f64 / n as f64;
        assert!((r.rank - expected).abs() < 0.1, "{} vs {expected}", r.rank);
    }

    #[test]
    fn stabilize_textureless_flags_every_pair() {
        let mut spec = SynthSpec::new(3, 40, 40, 4, CameraPath::Static);
        spec.flat = true;
        let v = generate_synth(&spec).unwrap();
        let r = rank_video_stabilize(&v.frames, &StabilizeParams::default()).unwrap();
        assert_eq!(r.rank, 0.0);
        assert_eq!(r.flags.len(), 3);
        assert!(r.flags.iter().all(|f| f.issue == PairIssue::InsufficientMatches));

        let fr = rank_video_flow(&v.frames, &v.boxes, &FlowRankParams::default()).unwrap();
        assert_eq!(fr.rank, 0.0);
        assert_eq!(fr.flags.len(), 3);
    }
}
