//! End-to-end acceptance suite. Runs as a plain binary so every criterion
//! prints its verdict line even when it passes.

use std::process::ExitCode;
use std::time::Instant;

use camflow::align::{deformable_sample, ClipFeatureStack, OffsetField, OffsetPyramid, SamplingKernel};
use camflow::flow::{dense_flow, DenseFlowParams, FlowField};
use camflow::harness::checks::{
    alignment_recovery_error, bilinear_gradient_errors, deform_gradient_error, fusion_contract, fusion_gradient_errors,
    pyramid_linearity_error, pyramid_propagation_error, GRAD_TOLERANCE,
};
use camflow::harness::{generate_synth, CameraPath, CheckReport, SpriteSpec, SynthSpec};
use camflow::rank::{
    frame_flow_magnitude, mask_flow, rank_from_series, rank_video_flow, rank_video_stabilize, FlowRankParams, PixelBox,
    StabilizeParams,
};
use camflow::{FeatureMap, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Pearson correlation of the average ranks.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn flow_rank(spec: &SynthSpec) -> Result<f64> {
    let v = generate_synth(spec)?;
    Ok(rank_video_flow(&v.frames, &v.boxes, &FlowRankParams::default())?.rank)
}

fn stabilize_rank(spec: &SynthSpec) -> Result<f64> {
    let v = generate_synth(spec)?;
    Ok(rank_video_stabilize(&v.frames, &StabilizeParams::default())?.rank)
}

fn jitter(seed: u64, amplitude: f64) -> SynthSpec {
    SynthSpec::new(seed, 128, 128, 30, CameraPath::Jitter { amplitude }).with_id(format!("jitter-{amplitude}"))
}

fn ranking_monotonicity(r: &mut CheckReport) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    let start = Instant::now();
    let ranks = pool.install(|| {
        [0.0, 1.0, 2.0, 4.0]
            .iter()
            .map(|&a| flow_rank(&jitter(11, a)))
            .collect::<Result<Vec<_>>>()
    })?;
    let secs = start.elapsed().as_secs_f64();
    let increasing = ranks.windows(2).all(|w| w[0] < w[1]);
    let rho = spearman(&[0.0, 1.0, 2.0, 4.0], &ranks);
    r.record(
        "1_ranking_monotonicity",
        increasing && rho == 1.0 && secs < 30.0,
        rho,
        1.0,
    );
    Ok(format!(
        "ranks {ranks:.4?}, rho {rho}, {secs:.1} s single-threaded (limit 30 s)"
    ))
}

fn pan_vs_jitter(r: &mut CheckReport) -> Result<String> {
    let pan = flow_rank(&SynthSpec::new(
        12,
        128,
        128,
        30,
        CameraPath::Pan {
            speed: 2.0,
            direction_deg: 0.0,
        },
    ))?;
    let jit = flow_rank(&jitter(12, 2.0))?;
    let ratio = pan / jit;
    r.record("2_pan_vs_jitter", ratio < 0.1, ratio, 0.1);
    Ok(format!(
        "pan(2) {pan:.5}, jitter(2) {jit:.4}, ratio {ratio:.5} (limit 0.1)"
    ))
}

fn static_video(r: &mut CheckReport) -> Result<String> {
    let spec = SynthSpec::new(13, 64, 64, 10, CameraPath::Static);
    let (f, s) = (flow_rank(&spec)?, stabilize_rank(&spec)?);
    let worst = f.abs().max(s.abs());
    r.at_most("3_static_video", worst, 1e-6);
    Ok(format!("flow rank {f}, stabilization rank {s} (limit 1e-6)"))
}

fn dense_flow_accuracy(r: &mut CheckReport) -> Result<String> {
    let spec = SynthSpec::new(
        14,
        96,
        96,
        2,
        CameraPath::Pan {
            speed: 2.0,
            direction_deg: 0.0,
        },
    );
    let v = generate_synth(&spec)?;
    let f = dense_flow(v.frames.frame(0), v.frames.frame(1), &DenseFlowParams::default())?;
    let epe = f.field.mean_endpoint_error(v.displacements[0], 8);
    r.at_most("4_dense_flow_accuracy", epe, 0.5);
    Ok(format!("interior endpoint error {epe:.4} px (limit 0.5)"))
}

fn masking_exactness(r: &mut CheckReport) -> Result<String> {
    let flow = FlowField::uniform(10, 10, 2.0, 0.0);
    let b = PixelBox::new(0, 0, 5, 5)?;
    let masked = mask_flow(&flow, &[b]);
    let mags = masked.magnitude();
    let inside_nonzero = (0..10)
        .flat_map(|y| (0..10).map(move |x| (y, x)))
        .filter(|&(y, x)| b.contains(y, x) && mags.get(y, x) != 0.0)
        .count();
    let value = frame_flow_magnitude(&masked);
    r.record("5_masking_exactness", inside_nonzero == 0 && value == 1.5, value, 1.5);
    Ok(format!(
        "{inside_nonzero} masked pixels nonzero, mean magnitude {value} (expected exactly 1.5)"
    ))
}

fn rank_fidelity(r: &mut CheckReport) -> Result<String> {
    let a = rank_from_series(&[1.0, 3.0, 2.0], 3);
    let b = rank_from_series(&[0.7; 6], 7);
    r.record("6_rank_fidelity", a == 1.0 && b == 0.0, a, 1.0);
    Ok(format!("[1,3,2] over 3 frames -> {a}, constant series -> {b}"))
}

fn zero_offset_identity(r: &mut CheckReport) -> Result<String> {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, c, h, w) = (
            rng.gen_range(1..4),
            rng.gen_range(1..6),
            rng.gen_range(1..12),
            rng.gen_range(1..12),
        );
        let maps: Vec<_> = (0..t)
            .map(|_| FeatureMap::from_fn(c, h, w, |_, _, _| rng.gen_range(-10.0..10.0)))
            .collect();
        let clip = ClipFeatureStack::single(maps.clone())?;
        let zero = OffsetPyramid {
            levels: vec![OffsetField::zeros(t, h, w)],
        };
        for (a, b) in deformable_sample(&clip, &zero, 0, &SamplingKernel::identity())?
            .iter()
            .zip(&maps)
        {
            worst = worst.max(a.max_abs_diff(b)?);
        }
    }
    r.at_most("7_zero_offset_identity", worst, 0.0);
    Ok(format!("max deviation over 20 instances {worst:e} (must be exactly 0)"))
}

fn pyramid_refinement(r: &mut CheckReport) -> Result<String> {
    let mut prop: f64 = 0.0;
    let mut lin: f64 = 0.0;
    for seed in 0..10 {
        prop = prop.max(pyramid_propagation_error(seed)?);
        lin = lin.max(pyramid_linearity_error(seed)?);
    }
    r.at_most("8_pyramid_refinement", prop.max(lin), 1e-9);
    Ok(format!(
        "propagation error {prop:.1e}, linearity error {lin:.1e} (limit 1e-9)"
    ))
}

fn gradient_suite(r: &mut CheckReport) -> Result<String> {
    let start = Instant::now();
    let mut worst = [0.0f64; 6];
    for seed in 0..10 {
        let (v, c) = bilinear_gradient_errors(seed)?;
        let d = deform_gradient_error(seed)?;
        let f = fusion_gradient_errors(seed)?;
        for (w, e) in worst.iter_mut().zip([v, c, d, f.local, f.global, f.embed]) {
            *w = w.max(e);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().copied().fold(0.0, f64::max);
    r.record(
        "9_gradient_suite",
        max < GRAD_TOLERANCE && secs < 60.0,
        max,
        GRAD_TOLERANCE,
    );
    Ok(format!(
        "max rel. errors: sample values {:.1e}, sample coords {:.1e}, deform offsets {:.1e}, \
         fusion local {:.1e}, global {:.1e}, embed {:.1e}; {secs:.1} s (limits 1e-3, 60 s)",
        worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
    ))
}

fn fusion_contracts(r: &mut CheckReport) -> Result<String> {
    let (m, _) = fusion_contract(2024, 50)?;
    let pass = m.partition <= 1e-12 && m.range <= 0.0 && m.zero_embed_gap <= 1e-12 && m.convexity <= 1e-12;
    r.record(
        "10_fusion_contracts",
        pass,
        m.partition.max(m.zero_embed_gap).max(m.convexity),
        1e-12,
    );
    Ok(format!(
        "partition {:e}, zero-network gap {:e}, convexity excursion {:e} (limit 1e-12)",
        m.partition, m.zero_embed_gap, m.convexity
    ))
}

fn alignment_recovery(r: &mut CheckReport) -> Result<String> {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        worst = worst.max(alignment_recovery_error(seed)?);
    }
    r.at_most("11_alignment_recovery", worst, 1e-9);
    Ok(format!("max interior gap {worst:e} (limit 1e-9)"))
}

fn method_agreement(r: &mut CheckReport) -> Result<String> {
    let amplitudes = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0];
    let sprite = SpriteSpec {
        y: 20.0,
        x: 20.0,
        height: 16,
        width: 16,
        vy: 1.0,
        vx: 1.5,
    };
    let corpus: Vec<SynthSpec> = amplitudes
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut s = SynthSpec::new(100 + i as u64, 96, 96, 24, CameraPath::Jitter { amplitude: a });
            if i % 2 == 1 {
                s.sprite = Some(sprite);
            }
            s
        })
        .collect();
    let flow: Vec<f64> = corpus.iter().map(flow_rank).collect::<Result<_>>()?;
    let stab: Vec<f64> = corpus.iter().map(stabilize_rank).collect::<Result<_>>()?;
    let rho = spearman(&flow, &stab);
    r.at_least("12_method_agreement", rho, 0.9);
    Ok(format!(
        "flow {flow:.3?}, stabilization {stab:.3?}, rho {rho:.4} (limit 0.9)"
    ))
}

type Criterion = fn(&mut CheckReport) -> Result<String>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 12] = [
        ("ranking monotonicity", ranking_monotonicity),
        ("smooth pan vs jitter", pan_vs_jitter),
        ("static video", static_video),
        ("dense flow accuracy", dense_flow_accuracy),
        ("masking exactness", masking_exactness),
        ("rank unit fidelity", rank_fidelity),
        ("zero-offset identity", zero_offset_identity),
        ("pyramid refinement", pyramid_refinement),
        ("gradient suite", gradient_suite),
        ("fusion contracts", fusion_contracts),
        ("alignment recovery", alignment_recovery),
        ("ranking-method agreement", method_agreement),
    ];
    let mut report = CheckReport::default();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let before: Vec<String> = report.checks.keys().cloned().collect();
        let (ok, detail) = match run(&mut report) {
            Ok(detail) => {
                let added: Vec<_> = report.checks.iter().filter(|(k, _)| !before.contains(k)).collect();
                (added.len() == 1 && added[0].1.pass, detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {}  {detail}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
