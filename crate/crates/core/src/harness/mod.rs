//! Everything needed to run experiments end to end: frame and annotation
//! I/O, the synthetic moving-camera generator, flow files, check reports
//! and the self-check suites.

pub mod annotations;
pub mod checks;
pub mod flo;
pub mod frames;
pub mod netpbm;
pub mod report;
pub mod synth;

pub use annotations::load_annotations;
pub use frames::{load_frames, save_frames, BitDepth, FrameSequence};
pub use report::{Check, CheckReport};
pub use synth::{generate_synth, CameraPath, SpriteSpec, SynthSpec, SynthVideo};

/// Environment variable capping worker threads; `0` or unset means one
/// per core.
pub const THREADS_ENV: &str = "CAMFLOW_THREADS";

/// Installs the global rayon pool according to [`THREADS_ENV`]. Later
/// calls are no-ops.
pub fn configure_threads() {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::debug!("thread pool already configured: {e}");
    }
}
