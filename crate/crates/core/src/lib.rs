//! Camera-motion quantification and motion-robust feature aggregation.
//!
//! The crate has three halves:
//!
//! * [`flow`] and [`rank`] measure how much a camera moves in a video.
//!   Dense optical flow is masked with actor boxes, averaged per frame,
//!   and the frame-to-frame variation of that average becomes the video's
//!   rank. A stabilization-style baseline built on corner tracking is
//!   provided for comparison.
//! * [`align`] and [`fusion`] implement the two feature-level mechanisms
//!   for detection under camera motion: deformable sampling driven by a
//!   coarse-to-fine offset pyramid, and softmax-weighted fusion of local
//!   and pooled global features. Both come with analytic gradients.
//! * [`harness`] holds file I/O, a seeded synthetic moving-camera
//!   generator that supplies ground truth, and the self-check suites the
//!   CLI runs.
//!
//! [`grid`] and [`gradcheck`] are the numeric substrate underneath.

pub mod align;
pub mod error;
pub mod flow;
pub mod fusion;
pub mod gradcheck;
pub mod grid;
pub mod harness;
pub mod rank;

pub use error::{Error, Result};
pub use grid::{FeatureMap, Grid2D};

// Compile and run the guide's code listings as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/grids.md")]
    pub struct Grids;
    #[doc = include_str!("../../../book/src/flow.md")]
    pub struct Flow;
    #[doc = include_str!("../../../book/src/ranking.md")]
    pub struct Ranking;
    #[doc = include_str!("../../../book/src/alignment.md")]
    pub struct Alignment;
    #[doc = include_str!("../../../book/src/fusion.md")]
    pub struct Fusion;
    #[doc = include_str!("../../../book/src/harness.md")]
    pub struct Harness;
}
