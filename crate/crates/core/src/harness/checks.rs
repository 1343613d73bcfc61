//! Self-check suites for the alignment and fusion layers, plus the
//! seeded finite-difference instances they share with the test suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::CheckReport;
use crate::align::{
    align_clip, deform_map, deform_map_backward, deformable_sample, refine_offsets, upsample_ratio, AlignOptions,
    ClipFeatureStack, OffsetField, OffsetPredictor, OffsetPyramid, SamplingKernel, DEFAULT_SCALES,
};
use crate::error::Result;
use crate::fusion::{
    fuse_average, fuse_concat, fuse_weighted, fuse_weighted_backward, make_global, EmbedNet, GlobalFeature,
};
use crate::gradcheck::finite_diff_check;
use crate::grid::{FeatureMap, Grid2D};

pub const GRAD_STEP: f64 = 1e-4;
pub const GRAD_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 0;

fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    FeatureMap::from_fn(c, h, w, |_, _, _| rng.gen_range(-1.0..1.0))
}

/// A coordinate whose fractional part stays clear of the integer kinks of
/// bilinear interpolation.
fn off_grid(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    rng.gen_range(lo..hi) as f64 + rng.gen_range(0.1..0.9)
}

fn dot(a: &FeatureMap, b: &FeatureMap) -> f64 {
    a.to_flat().iter().zip(b.to_flat()).map(|(x, y)| x * y).sum()
}

/// Max relative errors of analytic bilinear-sampling gradients, with
/// respect to grid values and to sample coordinates.
pub fn bilinear_gradient_errors(seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (5, 6);
    let grid = Grid2D::from_fn(h, w, |_, _| rng.gen_range(-1.0..1.0));
    let pts: Vec<(f64, f64, f64)> = (0..8)
        .map(|_| {
            (
                off_grid(&mut rng, -1, h as i32),
                off_grid(&mut rng, -1, w as i32),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();

    let mut g_values = vec![0.0; h * w];
    let mut g_coords = Vec::with_capacity(2 * pts.len());
    for &(y, x, u) in &pts {
        let g = grid.sample_backward(y, x, u);
        for (yy, xx, v) in g.cells {
            g_values[yy * w + xx] += v;
        }
        g_coords.push(g.dy);
        g_coords.push(g.dx);
    }

    let values = finite_diff_check(
        |p| {
            let g = Grid2D::new(h, w, p.to_vec())?;
            Ok(pts.iter().map(|&(y, x, u)| u * g.sample(y, x)).sum())
        },
        grid.values(),
        &g_values,
        GRAD_STEP,
    )?;
    let coords: Vec<f64> = pts.iter().flat_map(|&(y, x, _)| [y, x]).collect();
    let coord = finite_diff_check(
        |p| {
            Ok(pts
                .iter()
                .enumerate()
                .map(|(i, &(_, _, u))| u * grid.sample(p[2 * i], p[2 * i + 1]))
                .sum())
        },
        &coords,
        &g_coords,
        GRAD_STEP,
    )?;
    Ok((values.max_rel_error, coord.max_rel_error))
}

/// Max relative error of the deformable-sampling gradient with respect to
/// the offsets, under a random 3×3 kernel.
pub fn deform_gradient_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, h, w) = (2, 5, 5);
    let map = random_map(&mut rng, c, h, w);
    let dy = Grid2D::from_fn(h, w, |_, _| off_grid(&mut rng, -2, 2));
    let dx = Grid2D::from_fn(h, w, |_, _| off_grid(&mut rng, -2, 2));
    let kernel = SamplingKernel(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
    let up = random_map(&mut rng, c, h, w);
    let g = deform_map_backward(&map, &dy, &dx, &kernel, &up)?;

    let mut offs = dy.values().to_vec();
    offs.extend(dx.values());
    let mut analytic = g.dy.into_values();
    analytic.extend(g.dx.values());
    let r = finite_diff_check(
        |p| {
            let dy = Grid2D::new(h, w, p[..h * w].to_vec())?;
            let dx = Grid2D::new(h, w, p[h * w..].to_vec())?;
            Ok(dot(&deform_map(&map, &dy, &dx, &kernel)?, &up))
        },
        &offs,
        &analytic,
        GRAD_STEP,
    )?;
    Ok(r.max_rel_error)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionGradientErrors {
    pub local: f64,
    pub global: f64,
    pub embed: f64,
}

/// Margin kept between every hidden pre-activation and the ramp's kink, so
/// central differences never straddle it.
const KINK_MARGIN: f64 = 1e-2;

/// Max relative errors of the weighted-fusion gradients on a random
/// instance (3 channels, 4×4).
pub fn fusion_gradient_errors(seed: u64) -> Result<FusionGradientErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, h, w) = (3, 4, 4);
    let (net, local, global) = loop {
        let net = EmbedNet::random(c, 1.0, &mut rng)?;
        let local = random_map(&mut rng, c, h, w);
        let global = GlobalFeature::new((0..c).map(|_| rng.gen_range(-1.0..1.0)).collect(), h, w)?;
        let margin = net
            .forward_cached(&local)?
            .1
            .min_abs_preactivation()
            .min(net.forward_cached(&global.broadcast())?.1.min_abs_preactivation());
        if margin > KINK_MARGIN {
            break (net, local, global);
        }
    };
    let up = random_map(&mut rng, c, h, w);
    let loss =
        |l: &FeatureMap, g: &GlobalFeature, n: &EmbedNet| -> Result<f64> { Ok(dot(&fuse_weighted(l, g, n)?.0, &up)) };
    let grads = fuse_weighted_backward(&local, &global, &net, &up)?;

    let local_err = finite_diff_check(
        |p| loss(&FeatureMap::from_flat(c, h, w, p)?, &global, &net),
        &local.to_flat(),
        &grads.local.to_flat(),
        GRAD_STEP,
    )?;
    let global_err = finite_diff_check(
        |p| loss(&local, &GlobalFeature::new(p.to_vec(), h, w)?, &net),
        global.values(),
        &grads.global,
        GRAD_STEP,
    )?;
    let embed_err = finite_diff_check(
        |p| {
            let mut n = net.clone();
            n.set_params(p)?;
            loss(&local, &global, &n)
        },
        &net.params(),
        &grads.embed,
        GRAD_STEP,
    )?;
    Ok(FusionGradientErrors {
        local: local_err.max_rel_error,
        global: global_err.max_rel_error,
        embed: embed_err.max_rel_error,
    })
}

/// Largest deviation of zero-offset deformable sampling from its input over
/// `count` random clips.
pub fn zero_offset_deviation(seed: u64, count: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let t = rng.gen_range(1..4);
        let c = rng.gen_range(1..5);
        let (h, w) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let maps: Vec<_> = (0..t).map(|_| random_map(&mut rng, c, h, w)).collect();
        let clip = ClipFeatureStack::single(maps.clone())?;
        let offsets = OffsetPyramid {
            levels: vec![OffsetField::zeros(t, h, w)],
        };
        let out = deformable_sample(&clip, &offsets, 0, &SamplingKernel::identity())?;
        for (a, b) in out.iter().zip(&maps) {
            worst = worst.max(a.max_abs_diff(b)?);
        }
    }
    Ok(worst)
}

/// Align-corners bilinear upsampling written out longhand.
fn oracle_upsample(src: &Grid2D, oh: usize, ow: usize) -> Grid2D {
    let (sh, sw) = src.dims();
    let coord = |i: usize, s: usize, o: usize| {
        if o > 1 {
            i as f64 * (s - 1) as f64 / (o - 1) as f64
        } else {
            0.0
        }
    };
    Grid2D::from_fn(oh, ow, |i, j| {
        let (y, x) = (coord(i, sh, oh), coord(j, sw, ow));
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(sh - 1), (x0 + 1).min(sw - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        (1.0 - fy) * ((1.0 - fx) * src.get(y0, x0) + fx * src.get(y0, x1))
            + fy * ((1.0 - fx) * src.get(y1, x0) + fx * src.get(y1, x1))
    })
}

/// A constant offset on the 1×1 level of the default ladder, zero raw
/// offsets elsewhere. Returns the largest gap between the refined pyramid
/// and a longhand upsample-and-rescale oracle, and between each level and
/// the constant times the cumulative ratio.
pub fn pyramid_propagation_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dy, dx) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let n = DEFAULT_SCALES.len();
    let mut levels: Vec<OffsetField> = DEFAULT_SCALES.iter().map(|&s| OffsetField::zeros(1, s, s)).collect();
    levels[n - 1] = OffsetField::constant(1, 1, 1, 0, dy, dx);
    let refined = refine_offsets(&OffsetPyramid { levels }, true)?;

    let mut worst: f64 = 0.0;
    let (mut oy, mut ox) = (Grid2D::filled(1, 1, dy), Grid2D::filled(1, 1, dx));
    let mut cumulative = 1.0;
    for k in (0..n).rev() {
        let side = DEFAULT_SCALES[k];
        if k + 1 < n {
            let r = upsample_ratio(DEFAULT_SCALES[k + 1], side);
            cumulative *= r;
            oy = oracle_upsample(&oy, side, side).scale(r);
            ox = oracle_upsample(&ox, side, side).scale(r);
        }
        let f = refined.level(k);
        for (got, want, closed) in [(f.dy(0), &oy, dy * cumulative), (f.dx(0), &ox, dx * cumulative)] {
            for (&g, &o) in got.values().iter().zip(want.values()) {
                worst = worst.max((g - o).abs()).max((g - closed).abs());
            }
        }
    }
    Ok(worst)
}

/// `refine(a·A + b·B)` against `a·refine(A) + b·refine(B)` on random
/// pyramids.
pub fn pyramid_linearity_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for rescale in [true, false] {
        let t = rng.gen_range(1..4);
        let random = |rng: &mut ChaCha8Rng| OffsetPyramid {
            levels: [12, 6, 3, 1]
                .iter()
                .map(|&s| OffsetField::new(random_map(rng, 2 * t, s, s)).expect("even channel count"))
                .collect(),
        };
        let (a, b) = (random(&mut rng), random(&mut rng));
        let (ca, cb) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let lhs = refine_offsets(&a.combine(&b, ca, cb)?, rescale)?;
        let rhs = refine_offsets(&a, rescale)?.combine(&refine_offsets(&b, rescale)?, ca, cb)?;
        worst = worst.max(lhs.max_abs_diff(&rhs)?);
    }
    Ok(worst)
}

/// Two-frame clip whose earlier frame is the reference shifted by a random
/// integer offset; the predictor bias is set to that offset. Returns the
/// largest interior gap between the aligned frame and the reference.
pub fn alignment_recovery_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, n) = (3, 12);
    let (dy, dx) = loop {
        let d = (rng.gen_range(-3isize..=3), rng.gen_range(-3isize..=3));
        if d != (0, 0) {
            break d;
        }
    };
    let reference = random_map(&mut rng, c, n, n);
    let prev = FeatureMap::from_fn(c, n, n, |ch, y, x| {
        reference.channel(ch).get_or_zero(y as isize - dy, x as isize - dx)
    });
    let coarse = random_map(&mut rng, c, 1, 1);
    let clip = ClipFeatureStack::new(vec![vec![prev, reference.clone()], vec![coarse.clone(), coarse]])?;
    let mut predictor = OffsetPredictor::zeros_for(&clip);
    predictor.set_bias(0, 0, dy as f64, dx as f64);
    let out = align_clip(&clip, &predictor, &AlignOptions::default())?;
    let aligned = &out.stack.scale(0)[0];
    let inside = |v: isize| (0..n as isize).contains(&v);
    let mut worst: f64 = 0.0;
    for ch in 0..c {
        for y in 0..n {
            for x in 0..n {
                if inside(y as isize + dy) && inside(x as isize + dx) {
                    worst = worst.max((aligned.get(ch, y, x) - reference.get(ch, y, x)).abs());
                }
            }
        }
    }
    Ok(worst)
}

pub fn align_check(seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::default();
    r.at_most("zero_offset_identity", zero_offset_deviation(seed, 20)?, 0.0);
    r.at_most("pyramid_propagation", pyramid_propagation_error(seed)?, 1e-9);
    r.at_most("pyramid_linearity", pyramid_linearity_error(seed)?, 1e-9);
    r.at_most("alignment_recovery", alignment_recovery_error(seed)?, 1e-9);
    let (values, coords) = bilinear_gradient_errors(seed)?;
    r.at_most("bilinear_gradient_values", values, GRAD_TOLERANCE);
    r.at_most("bilinear_gradient_coords", coords, GRAD_TOLERANCE);
    r.at_most("deform_gradient_offsets", deform_gradient_error(seed)?, GRAD_TOLERANCE);
    Ok(r)
}

/// Contract measurements for weighted fusion over random instances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FusionContract {
    /// Largest `|w_local + w_global - 1|`.
    pub partition: f64,
    /// Largest distance of any weight outside `[0, 1]`.
    pub range: f64,
    /// Largest gap between zero-network weighted fusion and averaging.
    pub zero_embed_gap: f64,
    /// Largest excursion of the output outside `[min(l, g), max(l, g)]`.
    pub convexity: f64,
    /// Largest output change after shifting the final bias.
    pub shift_gap: f64,
    /// Largest reconstruction error of either half of the concatenation.
    pub concat_gap: f64,
}

pub fn fusion_contract(seed: u64, count: usize) -> Result<(FusionContract, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = FusionContract::default();
    let mut weights = Vec::new();
    for _ in 0..count {
        let c = rng.gen_range(1..7);
        let (h, w) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let spread = rng.gen_range(0.1..10.0);
        let local = random_map(&mut rng, c, h, w).map(|v| v * spread);
        let global = make_global(&local);
        let net = EmbedNet::random(c, 2.0, &mut rng)?;
        let (out, fw) = fuse_weighted(&local, &global, &net)?;
        for (&a, &b) in fw.local.values().iter().zip(fw.global.values()) {
            m.partition = m.partition.max((a + b - 1.0).abs());
            m.range = m.range.max((-a).max(a - 1.0)).max((-b).max(b - 1.0));
        }
        weights.extend_from_slice(fw.local.values());
        for ch in 0..c {
            let g = global.values()[ch];
            for y in 0..h {
                for x in 0..w {
                    let (l, p) = (local.get(ch, y, x), out.get(ch, y, x));
                    m.convexity = m.convexity.max(l.min(g) - p).max(p - l.max(g));
                }
            }
        }

        let (zero, _) = fuse_weighted(&local, &global, &EmbedNet::zeros(c)?)?;
        m.zero_embed_gap = m
            .zero_embed_gap
            .max(zero.max_abs_diff(&fuse_average(&local, &global)?)?);

        let mut shifted = net.clone();
        shifted.layer_mut(2).bias_mut()[0] += rng.gen_range(-5.0..5.0);
        m.shift_gap = m
            .shift_gap
            .max(fuse_weighted(&local, &global, &shifted)?.0.max_abs_diff(&out)?);

        let cat = fuse_concat(&local, &global)?;
        m.concat_gap = m
            .concat_gap
            .max(cat.slice_channels(0..c)?.max_abs_diff(&local)?)
            .max(cat.slice_channels(c..2 * c)?.max_abs_diff(&global.broadcast())?);
    }
    Ok((m, weights))
}

pub fn fuse_check(seed: u64) -> Result<CheckReport> {
    let mut r = CheckReport::default();
    let (m, weights) = fusion_contract(seed, 20)?;
    r.at_most("weight_partition", m.partition, 1e-12);
    r.at_most("weight_range", m.range, 0.0);
    r.at_most("zero_embed_is_average", m.zero_embed_gap, 1e-12);
    r.at_most("convex_combination", m.convexity, 1e-12);
    r.at_most("bias_shift_invariance", m.shift_gap, 1e-12);
    r.at_most("concat_lossless", m.concat_gap, 0.0);
    let g = fusion_gradient_errors(seed)?;
    r.at_most("gradient_local", g.local, GRAD_TOLERANCE);
    r.at_most("gradient_global", g.global, GRAD_TOLERANCE);
    r.at_most("gradient_embed", g.embed, GRAD_TOLERANCE);

    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    r.stat("local_weight_mean", mean);
    r.stat("local_weight_std", var.sqrt());
    r.stat(
        "local_weight_min",
        weights.iter().copied().fold(f64::INFINITY, f64::min),
    );
    r.stat(
        "local_weight_max",
        weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_several_seeds() {
        for seed in [DEFAULT_SEED, 1, 7, 12345] {
            let a = align_check(seed).unwrap();
            assert!(a.all_pass(), "seed {seed}: {:?}", a.failures());
            let f = fuse_check(seed).unwrap();
            assert!(f.all_pass(), "seed {seed}: {:?}", f.failures());
            assert!(f.stats.contains_key("local_weight_mean"));
        }
    }

    #[test]
    fn oracle_upsample_examples() {
        let g = Grid2D::from_rows(&[[0.0, 2.0]]).unwrap();
        assert_eq!(oracle_upsample(&g, 1, 3).values(), &[0.0, 1.0, 2.0]);
        let g = Grid2D::filled(1, 1, 4.0);
        assert!(oracle_upsample(&g, 3, 3).values().iter().all(|&v| v == 4.0));
    }
}
