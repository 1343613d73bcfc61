//! Seeded synthetic moving-camera sequences with closed-form ground truth.
//!
//! A large band-limited texture is viewed through a window whose position
//! follows the camera path; an optional textured sprite moves on its own
//! straight-line path on top and is reported as a box annotation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frames::FrameSequence;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::rank::{rank_from_series, Annotations, PixelBox};

/// How the camera moves between consecutive frames. Each variant yields a
/// per-pair content displacement `(dy, dx)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CameraPath {
    Static,
    /// Constant velocity `speed` px/frame along `direction_deg`
    /// (0 = +x, 90 = +y).
    Pan {
        speed: f64,
        #[serde(default)]
        direction_deg: f64,
    },
    /// Shake-and-hold: every other pair jerks by `amplitude` px, cycling
    /// through +x, -x, +y, -y; the pairs in between are still. Per-pair
    /// magnitudes alternate `amplitude, 0, amplitude, 0, ...`.
    Jitter {
        amplitude: f64,
    },
    /// Every pair moves `amplitude` px, cycling +x, -x, +y, -y. The mean
    /// displacement is zero but every pair has the same magnitude.
    Cycle {
        amplitude: f64,
    },
    /// A pan along +x with [`CameraPath::Jitter`] superimposed.
    Mixed {
        speed: f64,
        amplitude: f64,
    },
}

const AXIS_CYCLE: [(f64, f64); 4] = [(0.0, 1.0), (0.0, -1.0), (1.0, 0.0), (-1.0, 0.0)];

impl CameraPath {
    /// Content displacement between frame `pair` and `pair + 1`.
    pub fn displacement(&self, pair: usize) -> (f64, f64) {
        match *self {
            CameraPath::Static => (0.0, 0.0),
            CameraPath::Pan { speed, direction_deg } => {
                let (s, c) = direction_deg.to_radians().sin_cos();
                (speed * s, speed * c)
            }
            CameraPath::Jitter { amplitude } => jitter(amplitude, pair),
            CameraPath::Cycle { amplitude } => {
                let (uy, ux) = AXIS_CYCLE[pair % 4];
                (amplitude * uy, amplitude * ux)
            }
            CameraPath::Mixed { speed, amplitude } => {
                let (jy, jx) = jitter(amplitude, pair);
                (jy, jx + speed)
            }
        }
    }
}

fn jitter(amplitude: f64, pair: usize) -> (f64, f64) {
    if pair % 2 == 1 {
        return (0.0, 0.0);
    }
    let (uy, ux) = AXIS_CYCLE[(pair / 2) % 4];
    (amplitude * uy, amplitude * ux)
}

/// A textured rectangle moving in a straight line over the scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpriteSpec {
    /// Top-left corner in frame 0.
    pub y: f64,
    pub x: f64,
    pub height: usize,
    pub width: usize,
    /// Pixels per frame.
    #[serde(default)]
    pub vy: f64,
    #[serde(default)]
    pub vx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_id")]
    pub id: String,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub camera: CameraPath,
    #[serde(default)]
    pub sprite: Option<SpriteSpec>,
    /// Radius of the three box-filter passes that band-limit the texture.
    #[serde(default = "default_blur")]
    pub blur_radius: usize,
    /// Zero-texture frames, for degenerate-input checks.
    #[serde(default)]
    pub flat: bool,
}

fn default_id() -> String {
    "synth".into()
}

fn default_blur() -> usize {
    2
}

impl SynthSpec {
    pub fn new(seed: u64, height: usize, width: usize, frames: usize, camera: CameraPath) -> Self {
        Self {
            id: default_id(),
            seed,
            height,
            width,
            frames,
            camera,
            sprite: None,
            blur_radius: default_blur(),
            flat: false,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Ground-truth displacement for every consecutive pair.
    pub fn displacements(&self) -> Vec<(f64, f64)> {
        (0..self.frames.saturating_sub(1))
            .map(|t| self.camera.displacement(t))
            .collect()
    }

    /// Moving-difference rank evaluated on the true per-pair magnitudes.
    pub fn true_rank(&self) -> f64 {
        let mags: Vec<f64> = self.displacements().iter().map(|d| d.0.hypot(d.1)).collect();
        rank_from_series(&mags, self.frames)
    }

    fn validate(&self) -> Result<()> {
        if self.height < 4 || self.width < 4 {
            return Err(Error::Spec(format!(
                "frame size {}x{} too small",
                self.height, self.width
            )));
        }
        if self.frames == 0 {
            return Err(Error::Spec("need at least one frame".into()));
        }
        let finite = |v: f64| v.is_finite();
        let camera_ok = match self.camera {
            CameraPath::Static => true,
            CameraPath::Pan { speed, direction_deg } => finite(speed) && finite(direction_deg),
            CameraPath::Jitter { amplitude } | CameraPath::Cycle { amplitude } => finite(amplitude),
            CameraPath::Mixed { speed, amplitude } => finite(speed) && finite(amplitude),
        };
        if !camera_ok {
            return Err(Error::Spec("camera path parameters must be finite".into()));
        }
        if let Some(s) = &self.sprite {
            if s.height == 0 || s.width == 0 {
                return Err(Error::Spec("sprite must have positive size".into()));
            }
            for t in 0..self.frames {
                let (y, x) = sprite_pos(s, t);
                if !(y >= 0.0
                    && x >= 0.0
                    && y + s.height as f64 <= self.height as f64
                    && x + s.width as f64 <= self.width as f64)
                {
                    return Err(Error::Spec(format!("sprite leaves the frame at frame {t}")));
                }
            }
        }
        Ok(())
    }
}

fn sprite_pos(s: &SpriteSpec, t: usize) -> (f64, f64) {
    (s.y + s.vy * t as f64, s.x + s.vx * t as f64)
}

#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub frames: FrameSequence,
    pub boxes: Annotations,
    /// True content displacement for each consecutive pair.
    pub displacements: Vec<(f64, f64)>,
    /// [`SynthSpec::true_rank`].
    pub true_rank: f64,
}

/// Seeded white noise, blurred by three box-filter passes of `radius`,
/// then stretched to span `[0,1]`.
pub fn texture(seed: u64, height: usize, width: usize, radius: usize) -> Grid2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Grid2D::from_fn(height, width, |_, _| rng.gen::<f64>());
    for _ in 0..3 {
        g = box_blur(&g, radius);
    }
    let (lo, hi) = (g.min(), g.max());
    if hi > lo {
        g = g.map(|v| (v - lo) / (hi - lo));
    }
    g
}

fn box_blur(g: &Grid2D, radius: usize) -> Grid2D {
    if radius == 0 {
        return g.clone();
    }
    let r = radius as isize;
    let n = (2 * r + 1) as f64;
    let (h, w) = g.dims();
    let horiz = Grid2D::from_fn(h, w, |y, x| {
        (-r..=r).map(|d| g.get_clamped(y as isize, x as isize + d)).sum::<f64>() / n
    });
    Grid2D::from_fn(h, w, |y, x| {
        (-r..=r)
            .map(|d| horiz.get_clamped(y as isize + d, x as isize))
            .sum::<f64>()
            / n
    })
}

pub fn generate_synth(spec: &SynthSpec) -> Result<SynthVideo> {
    spec.validate()?;
    let displacements = spec.displacements();

    // Camera position of each frame: cumulative content displacement.
    let mut pos = vec![(0.0, 0.0); spec.frames];
    for (t, d) in displacements.iter().enumerate() {
        pos[t + 1] = (pos[t].0 + d.0, pos[t].1 + d.1);
    }
    let reach = pos.iter().fold(0.0f64, |m, p| m.max(p.0.abs()).max(p.1.abs()));
    let margin = reach.ceil() as usize + 2;

    let canvas = if spec.flat {
        Grid2D::filled(spec.height + 2 * margin, spec.width + 2 * margin, 0.5)
    } else {
        texture(
            spec.seed,
            spec.height + 2 * margin,
            spec.width + 2 * margin,
            spec.blur_radius,
        )
    };
    let sprite_tex = spec.sprite.as_ref().map(|s| {
        let t = texture(spec.seed.wrapping_add(0x5eed), s.height + 2, s.width + 2, 1);
        // Push the sprite's contrast away from the background's mid-grey.
        t.map(|v| 0.15 + 0.7 * v)
    });

    let mut frames = Vec::with_capacity(spec.frames);
    let mut boxes = Annotations::default();
    for (t, p) in pos.iter().enumerate() {
        let mut f = Grid2D::from_fn(spec.height, spec.width, |y, x| {
            canvas.sample((y + margin) as f64 - p.0, (x + margin) as f64 - p.1)
        });
        if let (Some(s), Some(tex)) = (&spec.sprite, &sprite_tex) {
            let (sy, sx) = sprite_pos(s, t);
            let b = PixelBox::new(
                sx.floor() as usize,
                sy.floor() as usize,
                (sx + s.width as f64).ceil() as usize,
                (sy + s.height as f64).ceil() as usize,
            )?;
            for y in b.y1..b.y2 {
                for x in b.x1..b.x2 {
                    let (ly, lx) = (y as f64 - sy, x as f64 - sx);
                    if ly >= 0.0 && lx >= 0.0 && ly < s.height as f64 && lx < s.width as f64 {
                        f.set(y, x, tex.sample(ly + 1.0, lx + 1.0));
                    }
                }
            }
            boxes.push(t, b);
        }
        frames.push(f);
    }

    Ok(SynthVideo {
        frames: FrameSequence::new(spec.id.clone(), frames)?,
        boxes,
        displacements,
        true_rank: spec.true_rank(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_frames_identical() {
        let v = generate_synth(&SynthSpec::new(1, 32, 40, 4, CameraPath::Static)).unwrap();
        assert!(v.frames.frames().windows(2).all(|w| w[0] == w[1]));
        assert!(v.displacements.iter().all(|&d| d == (0.0, 0.0)));
        assert_eq!(v.true_rank, 0.0);
    }

    #[test]
    fn pan_ground_truth() {
        let spec = SynthSpec::new(
            2,
            32,
            32,
            5,
            CameraPath::Pan {
                speed: 2.0,
                direction_deg: 0.0,
            },
        );
        let v = generate_synth(&spec).unwrap();
        assert_eq!(v.displacements, vec![(0.0, 2.0); 4]);
        assert_eq!(v.true_rank, 0.0);
        // Content moves right: next(y, x + 2) == prev(y, x).
        let (a, b) = (v.frames.frame(0), v.frames.frame(1));
        for y in 0..32 {
            for x in 0..30 {
                assert_eq!(b.get(y, x + 2), a.get(y, x));
            }
        }
    }

    #[test]
    fn cycle_has_constant_magnitude_and_zero_true_rank() {
        let spec = SynthSpec::new(3, 32, 32, 9, CameraPath::Cycle { amplitude: 2.0 });
        let d = spec.displacements();
        assert_eq!(d[..4], [(0.0, 2.0), (0.0, -2.0), (2.0, 0.0), (-2.0, 0.0)]);
        assert!(d.iter().all(|v| v.0.hypot(v.1) == 2.0));
        assert_eq!(spec.true_rank(), 0.0);
    }

    #[test]
    fn jitter_true_rank_closed_form() {
        // Magnitudes alternate a, 0, a, ... over n-1 pairs: n-2 differences
        // of size a each, normalised by n.
        for (a, n) in [(1.0, 30usize), (2.0, 30), (4.0, 7), (2.0, 2)] {
            let spec = SynthSpec::new(4, 16, 16, n, CameraPath::Jitter { amplitude: a });
            let expected = if n < 3 { 0.0 } else { (n - 2) as f64 * a / n as f64 };
            assert!((spec.true_rank() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let mut spec = SynthSpec::new(
            5,
            24,
            24,
            6,
            CameraPath::Mixed {
                speed: 1.0,
                amplitude: 1.5,
            },
        );
        spec.sprite = Some(SpriteSpec {
            y: 4.0,
            x: 4.0,
            height: 6,
            width: 6,
            vy: 0.5,
            vx: 1.0,
        });
        let a = generate_synth(&spec).unwrap();
        let b = generate_synth(&spec).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.displacements, b.displacements);
        assert_eq!(a.boxes, b.boxes);
        assert_eq!(a.boxes.for_frame(5), &[PixelBox::new(9, 6, 15, 13).unwrap()]);
    }

    #[test]
    fn sprite_leaving_frame_is_rejected() {
        let mut spec = SynthSpec::new(6, 20, 20, 10, CameraPath::Static);
        spec.sprite = Some(SpriteSpec {
            y: 2.0,
            x: 2.0,
            height: 5,
            width: 5,
            vy: 0.0,
            vx: 2.0,
        });
        assert!(matches!(generate_synth(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{"seed":7,"height":64,"width":64,"frames":10,"camera":{"kind":"jitter","amplitude":2}}"#;
        let spec: SynthSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.camera, CameraPath::Jitter { amplitude: 2.0 });
        assert_eq!(spec.blur_radius, 2);
    }
}
