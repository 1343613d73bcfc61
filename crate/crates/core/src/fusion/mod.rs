//! Combining a local feature map with its pooled global context.
//!
//! Three strategies: channel concatenation, plain averaging, and a
//! per-cell softmax weighting where both inputs are scored by one shared
//! embedding network.

use rand::Rng;

use crate::error::{arg_err, Result};
use crate::grid::{global_avg_pool, relu, relu_backward, softmax_pair, Conv2d, FeatureMap, Grid2D};

/// Per-channel means of a map, remembered together with the map's size so
/// they can be broadcast back.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFeature {
    values: Vec<f64>,
    height: usize,
    width: usize,
}

impl GlobalFeature {
    pub fn new(values: Vec<f64>, height: usize, width: usize) -> Result<Self> {
        if values.is_empty() || height == 0 || width == 0 {
            return arg_err("global feature needs at least one channel and a nonempty size");
        }
        Ok(Self { values, height, width })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_channels(&self) -> usize {
        self.values.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn broadcast(&self) -> FeatureMap {
        FeatureMap::from_fn(self.values.len(), self.height, self.width, |c, _, _| self.values[c])
    }

    fn check_pair(&self, local: &FeatureMap) -> Result<()> {
        if local.num_channels() != self.num_channels() || local.dims() != self.dims() {
            return arg_err(format!(
                "local map is {}x{}x{}, global feature is {}x{}x{}",
                local.num_channels(),
                local.height(),
                local.width(),
                self.num_channels(),
                self.height,
                self.width
            ));
        }
        Ok(())
    }
}

pub fn make_global(local: &FeatureMap) -> GlobalFeature {
    let (height, width) = local.dims();
    GlobalFeature {
        values: global_avg_pool(local),
        height,
        width,
    }
}

/// Local channels first, then the broadcast global channels. The next
/// layer has to accept twice the channels.
pub fn fuse_concat(local: &FeatureMap, global: &GlobalFeature) -> Result<FeatureMap> {
    global.check_pair(local)?;
    let mut channels = local.channels().to_vec();
    channels.extend(global.broadcast().into_channels());
    FeatureMap::new(channels)
}

/// `(local + global) / 2` at every cell.
pub fn fuse_average(local: &FeatureMap, global: &GlobalFeature) -> Result<FeatureMap> {
    global.check_pair(local)?;
    local.zip_map(&global.broadcast(), |l, g| (l + g) / 2.0)
}

/// `local + global` at every cell.
pub fn fuse_sum(local: &FeatureMap, global: &GlobalFeature) -> Result<FeatureMap> {
    global.check_pair(local)?;
    local.zip_map(&global.broadcast(), |l, g| l + g)
}

/// Three convolutions with a ramp between them: 1×1 from `C` to `C/2`
/// channels, 3×3 keeping `C/2`, then 1×1 down to a single score channel.
/// `C/2` is rounded down but never below one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedNet {
    layers: [Conv2d; 3],
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EmbedCache {
    input: FeatureMap,
    pre1: FeatureMap,
    act1: FeatureMap,
    pre2: FeatureMap,
    act2: FeatureMap,
}

impl EmbedCache {
    /// Distance of the closest hidden pre-activation from the ramp's kink.
    pub fn min_abs_preactivation(&self) -> f64 {
        self.pre1
            .to_flat()
            .iter()
            .chain(&self.pre2.to_flat())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

impl EmbedNet {
    pub fn hidden_width(channels: usize) -> usize {
        (channels / 2).max(1)
    }

    pub fn new(layers: [Conv2d; 3]) -> Result<Self> {
        let c = layers[0].in_channels();
        let h = Self::hidden_width(c);
        let shapes = [(h, c, 1), (h, h, 3), (1, h, 1)];
        for (i, (l, &(o, inp, k))) in layers.iter().zip(&shapes).enumerate() {
            if l.out_channels() != o || l.in_channels() != inp || l.kernel_size() != (k, k) {
                return arg_err(format!(
                    "layer {i} should map {inp} -> {o} channels with a {k}x{k} kernel"
                ));
            }
        }
        Ok(Self { layers })
    }

    /// All weights and biases zero: every input scores 0.
    pub fn zeros(channels: usize) -> Result<Self> {
        if channels == 0 {
            return arg_err("embedding network needs at least one input channel");
        }
        let h = Self::hidden_width(channels);
        Self::new([
            Conv2d::zeros(h, channels, 1, 1)?,
            Conv2d::zeros(h, h, 3, 3)?,
            Conv2d::zeros(1, h, 1, 1)?,
        ])
    }

    /// Weights and biases drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(channels: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(channels)?;
        let params: Vec<f64> = (0..net.num_params()).map(|_| rng.gen_range(-scale..=scale)).collect();
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels()
    }

    pub fn layer(&self, i: usize) -> &Conv2d {
        &self.layers[i]
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut Conv2d {
        &mut self.layers[i]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Conv2d::num_params).sum()
    }

    /// Flattened as layer by layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weights());
            out.extend_from_slice(l.bias());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return arg_err(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            ));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights().len());
            let (b, tail) = tail.split_at(l.bias().len());
            l.weights_mut().copy_from_slice(w);
            l.bias_mut().copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<Grid2D> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &FeatureMap) -> Result<(Grid2D, EmbedCache)> {
        let pre1 = self.layers[0].forward(input)?;
        let act1 = relu(&pre1);
        let pre2 = self.layers[1].forward(&act1)?;
        let act2 = relu(&pre2);
        let out = self.layers[2].forward(&act2)?.into_channels().remove(0);
        let cache = EmbedCache {
            input: input.clone(),
            pre1,
            act1,
            pre2,
            act2,
        };
        Ok((out, cache))
    }

    /// Gradient with respect to the input and the flattened parameters
    /// (same order as [`EmbedNet::params`]).
    pub fn backward(&self, cache: &EmbedCache, grad_out: &Grid2D) -> Result<(FeatureMap, Vec<f64>)> {
        let g3 = self.layers[2].backward(&cache.act2, &FeatureMap::from_grid(grad_out.clone()))?;
        let g2 = self.layers[1].backward(&cache.act1, &relu_backward(&cache.pre2, &g3.input)?)?;
        let g1 = self.layers[0].backward(&cache.input, &relu_backward(&cache.pre1, &g2.input)?)?;
        let mut params = Vec::with_capacity(self.num_params());
        for g in [&g1, &g2, &g3] {
            params.extend_from_slice(&g.weights);
            params.extend_from_slice(&g.bias);
        }
        Ok((g1.input, params))
    }
}

/// Per-cell softmax weights; `local + global = 1` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub local: Grid2D,
    pub global: Grid2D,
}

fn check_embed(local: &FeatureMap, global: &GlobalFeature, embed: &EmbedNet) -> Result<()> {
    global.check_pair(local)?;
    if embed.in_channels() != local.num_channels() {
        return arg_err(format!(
            "embedding network takes {} channels, features have {}",
            embed.in_channels(),
            local.num_channels()
        ));
    }
    Ok(())
}

fn blend(local: &FeatureMap, global: &FeatureMap, wl: &Grid2D) -> FeatureMap {
    let channels = local
        .channels()
        .iter()
        .zip(global.channels())
        .map(|(l, g)| {
            let (h, w) = l.dims();
            Grid2D::from_fn(h, w, |y, x| {
                let a = wl.get(y, x);
                l.get(y, x) * a + g.get(y, x) * (1.0 - a)
            })
        })
        .collect();
    FeatureMap::from_channels_unchecked(channels)
}

/// Scores both inputs with the shared `embed`, softmaxes the two scores at
/// each cell, and blends the inputs with the resulting weights. The weight
/// grids are shared by all channels.
pub fn fuse_weighted(
    local: &FeatureMap,
    global: &GlobalFeature,
    embed: &EmbedNet,
) -> Result<(FeatureMap, FusionWeights)> {
    check_embed(local, global, embed)?;
    let gmap = global.broadcast();
    let (wl, wg) = softmax_pair(&embed.forward(local)?, &embed.forward(&gmap)?)?;
    Ok((blend(local, &gmap, &wl), FusionWeights { local: wl, global: wg }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionGrads {
    pub local: FeatureMap,
    /// One entry per channel of the global vector.
    pub global: Vec<f64>,
    /// Same order as [`EmbedNet::params`].
    pub embed: Vec<f64>,
}

/// Gradients of `sum(upstream * fuse_weighted(local, global, embed).0)`.
pub fn fuse_weighted_backward(
    local: &FeatureMap,
    global: &GlobalFeature,
    embed: &EmbedNet,
    upstream: &FeatureMap,
) -> Result<FusionGrads> {
    check_embed(local, global, embed)?;
    local.check_same_shape(upstream)?;
    let gmap = global.broadcast();
    let (el, cache_l) = embed.forward_cached(local)?;
    let (eg, cache_g) = embed.forward_cached(&gmap)?;
    let (wl, _) = softmax_pair(&el, &eg)?;
    let (h, w) = local.dims();

    // d loss / d wl, then through the softmax: d wl / d el = wl (1 - wl)
    // and d wl / d eg is its negative.
    let score = Grid2D::from_fn(h, w, |y, x| {
        let dw: f64 = (0..local.num_channels())
            .map(|c| upstream.get(c, y, x) * (local.get(c, y, x) - gmap.get(c, y, x)))
            .sum();
        let a = wl.get(y, x);
        dw * a * (1.0 - a)
    });
    let (gl_embed, mut gp) = embed.backward(&cache_l, &score)?;
    let (gg_embed, gp_g) = embed.backward(&cache_g, &score.map(|v| -v))?;
    for (a, b) in gp.iter_mut().zip(gp_g) {
        *a += b;
    }

    let mut g_local = Vec::with_capacity(local.num_channels());
    let mut g_global = Vec::with_capacity(local.num_channels());
    for c in 0..local.num_channels() {
        let up = upstream.channel(c);
        g_local.push(Grid2D::from_fn(h, w, |y, x| {
            up.get(y, x) * wl.get(y, x) + gl_embed.get(c, y, x)
        }));
        let mut acc = 0.0;
        for y in 0..h {
            for x in 0..w {
                acc += up.get(y, x) * (1.0 - wl.get(y, x)) + gg_embed.get(c, y, x);
            }
        }
        g_global.push(acc);
    }
    Ok(FusionGrads {
        local: FeatureMap::new(g_local)?,
        global: g_global,
        embed: gp,
    })
}
