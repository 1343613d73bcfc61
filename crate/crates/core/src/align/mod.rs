//! Multi-scale deformable feature alignment.
//!
//! A clip holds `K + 1` feature maps per scale, the last one being the
//! reference frame. Per scale, a 3×3 convolution over the channel-stacked
//! clip predicts one `(dy, dx)` offset per timestep and cell. Offsets are
//! then refined coarse-to-fine: the coarsest level (1×1 by default) carries
//! the average camera motion, and each level's refined offsets are
//! upsampled, rescaled to the finer cell size and added to the next finer
//! level. Finally every non-reference timestep is resampled at its offset
//! positions, bringing its features into register with the reference.

mod deform;
mod pyramid;

pub use deform::{
    deform_map, deform_map_backward, deformable_sample, deformable_sample_backward, DeformGrads, SamplingKernel,
};
pub use pyramid::{refine_offsets, upsample_ratio};

use crate::error::{arg_err, Result};
use crate::grid::{Conv2d, FeatureMap, Grid2D};

/// Feature-map side lengths from finest to coarsest, the usual ladder of
/// a single-shot detector on 300-pixel input.
pub const DEFAULT_SCALES: [usize; 6] = [38, 19, 10, 5, 3, 1];

/// Channel-wise concatenation of maps in the given (temporal) order.
pub fn stack_features(maps: &[FeatureMap]) -> Result<FeatureMap> {
    let Some(first) = maps.first() else {
        return arg_err("nothing to stack");
    };
    if let Some(i) = maps.iter().position(|m| m.dims() != first.dims()) {
        return arg_err(format!("map {i} has different spatial dimensions"));
    }
    let channels = maps.iter().flat_map(|m| m.channels().iter().cloned()).collect();
    FeatureMap::new(channels)
}

/// Features of one clip at every scale: `scales[s][t]`, scale 0 finest,
/// timestep `K` the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatureStack {
    scales: Vec<Vec<FeatureMap>>,
}

impl ClipFeatureStack {
    pub fn new(scales: Vec<Vec<FeatureMap>>) -> Result<Self> {
        let Some(first) = scales.first() else {
            return arg_err("a clip needs at least one scale");
        };
        let steps = first.len();
        if steps == 0 {
            return arg_err("a clip needs at least one timestep");
        }
        let mut prev: Option<(usize, usize)> = None;
        for (s, maps) in scales.iter().enumerate() {
            if maps.len() != steps {
                return arg_err(format!("scale {s} has {} timesteps, expected {steps}", maps.len()));
            }
            let (c, dims) = (maps[0].num_channels(), maps[0].dims());
            if maps.iter().any(|m| m.num_channels() != c || m.dims() != dims) {
                return arg_err(format!("timesteps at scale {s} differ in shape"));
            }
            if let Some((ph, pw)) = prev {
                if dims.0 > ph || dims.1 > pw || dims.0 * dims.1 >= ph * pw {
                    return arg_err(format!("scale {s} is not smaller than scale {}", s - 1));
                }
            }
            prev = Some(dims);
        }
        Ok(Self { scales })
    }

    /// Single-scale clip.
    pub fn single(maps: Vec<FeatureMap>) -> Result<Self> {
        Self::new(vec![maps])
    }

    pub fn num_scales(&self) -> usize {
        self.scales.len()
    }

    /// `K + 1`.
    pub fn num_timesteps(&self) -> usize {
        self.scales[0].len()
    }

    pub fn reference_index(&self) -> usize {
        self.num_timesteps() - 1
    }

    pub fn scale(&self, s: usize) -> &[FeatureMap] {
        &self.scales[s]
    }

    pub fn scales(&self) -> &[Vec<FeatureMap>] {
        &self.scales
    }

    pub fn dims(&self, s: usize) -> (usize, usize) {
        self.scales[s][0].dims()
    }

    pub fn channels(&self, s: usize) -> usize {
        self.scales[s][0].num_channels()
    }

    /// The depth-concatenated clip at scale `s`.
    pub fn stacked(&self, s: usize) -> Result<FeatureMap> {
        stack_features(&self.scales[s])
    }
}

/// Offsets for one scale: a map with `2(K+1)` channels ordered
/// `dy_0, dx_0, dy_1, dx_1, ...`, in that scale's cell units.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField(FeatureMap);

impl OffsetField {
    pub fn new(map: FeatureMap) -> Result<Self> {
        if !map.num_channels().is_multiple_of(2) {
            return arg_err("offset field needs an even channel count");
        }
        Ok(Self(map))
    }

    pub fn zeros(timesteps: usize, height: usize, width: usize) -> Self {
        Self(FeatureMap::zeros(2 * timesteps, height, width))
    }

    /// Same `(dy, dx)` at every cell of timestep `t`, zero elsewhere.
    pub fn constant(timesteps: usize, height: usize, width: usize, t: usize, dy: f64, dx: f64) -> Self {
        let mut f = Self::zeros(timesteps, height, width);
        *f.0.channel_mut(2 * t) = Grid2D::filled(height, width, dy);
        *f.0.channel_mut(2 * t + 1) = Grid2D::filled(height, width, dx);
        f
    }

    pub fn timesteps(&self) -> usize {
        self.0.num_channels() / 2
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn dy(&self, t: usize) -> &Grid2D {
        self.0.channel(2 * t)
    }

    pub fn dx(&self, t: usize) -> &Grid2D {
        self.0.channel(2 * t + 1)
    }

    pub fn as_map(&self) -> &FeatureMap {
        &self.0
    }

    pub fn into_map(self) -> FeatureMap {
        self.0
    }
}

/// One offset field per scale, index 0 finest (matching
/// [`ClipFeatureStack`]).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetPyramid {
    pub levels: Vec<OffsetField>,
}

impl OffsetPyramid {
    pub fn num_scales(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, s: usize) -> &OffsetField {
        &self.levels[s]
    }

    /// `alpha * self + beta * other`, level by level.
    pub fn combine(&self, other: &Self, alpha: f64, beta: f64) -> Result<Self> {
        if self.levels.len() != other.levels.len() {
            return arg_err("pyramids differ in depth");
        }
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| Ok(OffsetField(a.0.zip_map(&b.0, |x, y| alpha * x + beta * y)?)))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.levels.len() != other.levels.len() {
            return arg_err("pyramids differ in depth");
        }
        self.levels
            .iter()
            .zip(&other.levels)
            .try_fold(0.0f64, |m, (a, b)| Ok(m.max(a.0.max_abs_diff(&b.0)?)))
    }
}

/// Per-scale 3×3 convolutions from the stacked clip to `2(K+1)` offset
/// channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetPredictor {
    convs: Vec<Conv2d>,
}

impl OffsetPredictor {
    pub fn new(convs: Vec<Conv2d>) -> Result<Self> {
        for (s, c) in convs.iter().enumerate() {
            if c.kernel_size() != (3, 3) || c.out_channels() % 2 != 0 {
                return arg_err(format!("scale {s}: predictor must be 3x3 with an even output count"));
            }
        }
        Ok(Self { convs })
    }

    /// All-zero weights and biases sized for `stack`; predicts zero offsets.
    pub fn zeros_for(stack: &ClipFeatureStack) -> Self {
        let t = stack.num_timesteps();
        Self {
            convs: (0..stack.num_scales())
                .map(|s| Conv2d::zeros(2 * t, t * stack.channels(s), 3, 3).expect("valid shape"))
                .collect(),
        }
    }

    pub fn conv(&self, s: usize) -> &Conv2d {
        &self.convs[s]
    }

    pub fn conv_mut(&mut self, s: usize) -> &mut Conv2d {
        &mut self.convs[s]
    }

    pub fn num_scales(&self) -> usize {
        self.convs.len()
    }

    /// Sets the bias of timestep `t` at scale `s` to `(dy, dx)`.
    pub fn set_bias(&mut self, s: usize, t: usize, dy: f64, dx: f64) {
        let b = self.convs[s].bias_mut();
        b[2 * t] = dy;
        b[2 * t + 1] = dx;
    }

    fn check(&self, stack: &ClipFeatureStack) -> Result<()> {
        if self.convs.len() != stack.num_scales() {
            return arg_err(format!(
                "predictor has {} scales, clip has {}",
                self.convs.len(),
                stack.num_scales()
            ));
        }
        let t = stack.num_timesteps();
        for (s, c) in self.convs.iter().enumerate() {
            if c.in_channels() != t * stack.channels(s) || c.out_channels() != 2 * t {
                return arg_err(format!(
                    "scale {s}: predictor maps {} -> {} channels, clip needs {} -> {}",
                    c.in_channels(),
                    c.out_channels(),
                    t * stack.channels(s),
                    2 * t
                ));
            }
        }
        Ok(())
    }
}

/// Raw (unrefined) offsets: the predictor applied to each scale's stacked
/// features.
pub fn predict_offsets(stack: &ClipFeatureStack, predictor: &OffsetPredictor) -> Result<OffsetPyramid> {
    predictor.check(stack)?;
    let levels = (0..stack.num_scales())
        .map(|s| OffsetField::new(predictor.conv(s).forward(&stack.stacked(s)?)?))
        .collect::<Result<_>>()?;
    Ok(OffsetPyramid { levels })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Rescale offsets by the cell-size ratio when carrying them to a finer
    /// level.
    pub rescale: bool,
    /// Also resample the reference frame instead of passing it through.
    pub sample_reference: bool,
    pub kernel: SamplingKernel,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            rescale: true,
            sample_reference: false,
            kernel: SamplingKernel::identity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedClip {
    pub stack: ClipFeatureStack,
    /// The refined offsets the features were sampled with.
    pub offsets: OffsetPyramid,
}

/// Predict, refine and apply offsets at every scale.
pub fn align_clip(
    stack: &ClipFeatureStack,
    predictor: &OffsetPredictor,
    options: &AlignOptions,
) -> Result<AlignedClip> {
    let raw = predict_offsets(stack, predictor)?;
    let offsets = refine_offsets(&raw, options.rescale)?;
    let reference = stack.reference_index();
    let mut scales = Vec::with_capacity(stack.num_scales());
    for s in 0..stack.num_scales() {
        let field = offsets.level(s);
        let maps = stack
            .scale(s)
            .iter()
            .enumerate()
            .map(|(t, m)| {
                if t == reference && !options.sample_reference {
                    Ok(m.clone())
                } else {
                    deform_map(m, field.dy(t), field.dx(t), &options.kernel)
                }
            })
            .collect::<Result<_>>()?;
        scales.push(maps);
    }
    Ok(AlignedClip {
        stack: ClipFeatureStack::new(scales)?,
        offsets,
    })
}
