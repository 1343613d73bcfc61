//! Stride-1, same-size, zero-padded 2-D convolution.

use super::{FeatureMap, Grid2D};
use crate::error::{arg_err, Result};

/// Convolution weights laid out `[out_ch][in_ch][kh][kw]`, plus one bias
/// per output channel. Kernel sizes are odd so the output keeps the input's
/// spatial size.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    out_ch: usize,
    in_ch: usize,
    kh: usize,
    kw: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: FeatureMap,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(out_ch: usize, in_ch: usize, kh: usize, kw: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if out_ch == 0 || in_ch == 0 {
            return arg_err("convolution needs at least one input and output channel");
        }
        if kh.is_multiple_of(2) || kw.is_multiple_of(2) {
            return arg_err(format!("kernel size must be odd, got {kh}x{kw}"));
        }
        if weights.len() != out_ch * in_ch * kh * kw {
            return arg_err(format!(
                "expected {} weights, got {}",
                out_ch * in_ch * kh * kw,
                weights.len()
            ));
        }
        if bias.len() != out_ch {
            return arg_err(format!("expected {out_ch} biases, got {}", bias.len()));
        }
        Ok(Self {
            out_ch,
            in_ch,
            kh,
            kw,
            weights,
            bias,
        })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(
            out_ch,
            in_ch,
            kh,
            kw,
            vec![0.0; out_ch * in_ch * kh * kw],
            vec![0.0; out_ch],
        )
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_ch + i) * self.kh + ky) * self.kw + kx
    }

    fn check_input(&self, input: &FeatureMap) -> Result<()> {
        if input.num_channels() != self.in_ch {
            return arg_err(format!(
                "convolution expects {} input channels, got {}",
                self.in_ch,
                input.num_channels()
            ));
        }
        Ok(())
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap> {
        self.check_input(input)?;
        let (h, w) = input.dims();
        let (ry, rx) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        let mut out = Vec::with_capacity(self.out_ch);
        for o in 0..self.out_ch {
            let mut acc = vec![self.bias[o]; h * w];
            for i in 0..self.in_ch {
                let src = input.channel(i);
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let wt = self.weights[self.widx(o, i, ky, kx)];
                        if wt == 0.0 {
                            continue;
                        }
                        let (oy, ox) = (ky as isize - ry, kx as isize - rx);
                        for y in 0..h {
                            let sy = y as isize + oy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for x in 0..w {
                                let sx = x as isize + ox;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                acc[y * w + x] += wt * src.get(sy as usize, sx as usize);
                            }
                        }
                    }
                }
            }
            out.push(Grid2D::from_vec_unchecked(h, w, acc));
        }
        Ok(FeatureMap::from_channels_unchecked(out))
    }

    /// Backpropagates `grad_out` (same shape as the forward output).
    pub fn backward(&self, input: &FeatureMap, grad_out: &FeatureMap) -> Result<ConvGrads> {
        self.check_input(input)?;
        if grad_out.num_channels() != self.out_ch || grad_out.dims() != input.dims() {
            return arg_err("upstream gradient shape does not match convolution output");
        }
        let (h, w) = input.dims();
        let (ry, rx) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        let mut gin = vec![vec![0.0; h * w]; self.in_ch];
        let mut gw = vec![0.0; self.weights.len()];
        let gb: Vec<f64> = grad_out.channels().iter().map(Grid2D::sum).collect();
        for o in 0..self.out_ch {
            let go = grad_out.channel(o);
            for (i, gi) in gin.iter_mut().enumerate() {
                let src = input.channel(i);
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let wi = self.widx(o, i, ky, kx);
                        let wt = self.weights[wi];
                        let (oy, ox) = (ky as isize - ry, kx as isize - rx);
                        let mut dw = 0.0;
                        for y in 0..h {
                            let sy = y as isize + oy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for x in 0..w {
                                let sx = x as isize + ox;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                let g = go.get(y, x);
                                let si = sy as usize * w + sx as usize;
                                dw += g * src.values()[si];
                                gi[si] += g * wt;
                            }
                        }
                        gw[wi] += dw;
                    }
                }
            }
        }
        Ok(ConvGrads {
            input: FeatureMap::from_channels_unchecked(
                gin.into_iter().map(|v| Grid2D::from_vec_unchecked(h, w, v)).collect(),
            ),
            weights: gw,
            bias: gb,
        })
    }
}
