//! Dense 2-D grids and multi-channel feature maps, plus the small set of
//! numeric kernels the rest of the crate is built from.
//!
//! All values are `f64`. Grids are row-major and immutable by convention:
//! every kernel returns a fresh grid rather than mutating its input.

mod conv;
mod ops;
pub(crate) mod sample;

pub use conv::{Conv2d, ConvGrads};
pub use ops::{global_avg_pool, relu, relu_backward, softmax_pair};
pub use sample::SampleGrad;

use crate::error::{arg_err, Error, Result};

/// A single-channel `height × width` grid of reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid2D {
    /// Builds a grid, checking the length and finiteness of `values`.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return arg_err(format!("grid dimensions must be positive, got {height}x{width}"));
        }
        if values.len() != height * width {
            return arg_err(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite grid value at index {i}")));
        }
        Ok(Self { height, width, values })
    }

    /// Builds a grid from nested rows. All rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return arg_err("ragged rows");
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(height, width, values)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        Self { height, width, values }
    }

    /// Internal constructor for kernels that already guarantee the shape.
    pub(crate) fn from_vec_unchecked(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self { height, width, values }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    /// Value at a possibly out-of-range integer coordinate, zero outside.
    #[inline]
    pub fn get_or_zero(&self, y: isize, x: isize) -> f64 {
        if y < 0 || x < 0 || y as usize >= self.height || x as usize >= self.width {
            0.0
        } else {
            self.values[y as usize * self.width + x as usize]
        }
    }

    /// Value with coordinates clamped to the nearest edge cell.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.values[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.height, self.width, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two equally-sized grids.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self::from_vec_unchecked(
            self.height,
            self.width,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return arg_err(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            ));
        }
        Ok(())
    }
}

/// A stack of equally sized channels, `C × H × W`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: Vec<Grid2D>,
}

impl FeatureMap {
    pub fn new(channels: Vec<Grid2D>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return arg_err("feature map needs at least one channel");
        };
        let dims = first.dims();
        if let Some(c) = channels.iter().position(|g| g.dims() != dims) {
            return arg_err(format!("channel {c} has different dimensions than channel 0"));
        }
        Ok(Self { channels })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0, "feature map needs at least one channel");
        Self {
            channels: vec![Grid2D::zeros(height, width); channels],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(channels > 0, "feature map needs at least one channel");
        Self {
            channels: (0..channels)
                .map(|c| Grid2D::from_fn(height, width, |y, x| f(c, y, x)))
                .collect(),
        }
    }

    /// Single-channel map wrapping `grid`.
    pub fn from_grid(grid: Grid2D) -> Self {
        Self { channels: vec![grid] }
    }

    /// Each channel filled with the matching entry of `values`.
    pub fn broadcast(values: &[f64], height: usize, width: usize) -> Result<Self> {
        if values.is_empty() {
            return arg_err("cannot broadcast an empty vector");
        }
        Ok(Self {
            channels: values.iter().map(|&v| Grid2D::filled(height, width, v)).collect(),
        })
    }

    pub(crate) fn from_channels_unchecked(channels: Vec<Grid2D>) -> Self {
        Self { channels }
    }

    #[inline]
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &Grid2D {
        &self.channels[c]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut Grid2D {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[Grid2D] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Grid2D> {
        self.channels
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.channels[c].get(y, x)
    }

    /// Channels `range` as a new map.
    pub fn slice_channels(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.channels.len() {
            return arg_err(format!(
                "channel range {range:?} out of bounds for {} channels",
                self.channels.len()
            ));
        }
        Ok(Self {
            channels: self.channels[range].to_vec(),
        })
    }

    /// Elementwise combination with an identically shaped map.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<Self> {
        self.check_same_shape(other)?;
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.zip_map(b, f))
            .collect::<Result<_>>()?;
        Ok(Self { channels })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            channels: self.channels.iter().map(|g| g.map(f)).collect(),
        }
    }

    /// All values, channel-major, as one flat vector.
    pub fn to_flat(&self) -> Vec<f64> {
        self.channels.iter().flat_map(|g| g.values().iter().copied()).collect()
    }

    /// Inverse of [`FeatureMap::to_flat`].
    pub fn from_flat(channels: usize, height: usize, width: usize, flat: &[f64]) -> Result<Self> {
        let plane = height * width;
        if flat.len() != channels * plane {
            return arg_err(format!(
                "expected {} values for {channels}x{height}x{width}, got {}",
                channels * plane,
                flat.len()
            ));
        }
        let grids = flat
            .chunks(plane)
            .map(|c| Grid2D::new(height, width, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grids)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .channels
            .iter()
            .zip(&other.channels)
            .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_channel(&self, channel: usize) -> Result<()> {
        if channel >= self.channels.len() {
            return arg_err(format!(
                "channel {channel} out of range for {} channels",
                self.channels.len()
            ));
        }
        Ok(())
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.num_channels() != other.num_channels() || self.dims() != other.dims() {
            return arg_err(format!(
                "shape mismatch: {}x{}x{} vs {}x{}x{}",
                self.num_channels(),
                self.height(),
                self.width(),
                other.num_channels(),
                other.height(),
                other.width()
            ));
        }
        Ok(())
    }
}
