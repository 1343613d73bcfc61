//! The `camflow` command line. [`run`] parses arguments, dispatches and
//! maps the outcome to a process exit code.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use camflow::flow::{dense_flow, DenseFlowParams};
use camflow::harness::annotations::{load_annotations, save_annotations};
use camflow::harness::checks::{align_check, fuse_check, DEFAULT_SEED};
use camflow::harness::{
    configure_threads, flo, generate_synth, load_frames, save_frames, BitDepth, CheckReport, SynthSpec,
};
use camflow::rank::{
    build_report, rank_video_flow, rank_video_stabilize, Annotations, Denominator, FlowRankParams, Method, RankingRow,
    StabilizeParams, DEFAULT_BINS,
};
use camflow::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "camflow",
    version,
    about = "Camera-motion ranking and feature alignment experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank one video directory.
    Rank(RankArgs),
    /// Rank every video in a list file and write a report plus histogram.
    RankCorpus(CorpusArgs),
    /// Dense flow between frames `pair` and `pair + 1`.
    Flow(FlowArgs),
    /// Materialize a synthetic sequence from a JSON spec.
    Synth(SynthArgs),
    /// Run the alignment self-checks.
    AlignCheck(CheckArgs),
    /// Run the fusion self-checks.
    FuseCheck(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Flow,
    Stabilize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DenominatorArg {
    All,
    Unmasked,
}

#[derive(Debug, Args)]
struct RankOptions {
    #[arg(long, value_enum, default_value = "flow")]
    method: MethodArg,
    /// What the per-frame mean magnitude divides by.
    #[arg(long, value_enum, default_value = "all")]
    denominator: DenominatorArg,
    /// Flow smoothness weight.
    #[arg(long)]
    smoothness: Option<f64>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Annotation CSV, `frame,x1,y1,x2,y2` per line.
    #[arg(long)]
    boxes: Option<PathBuf>,
    #[command(flatten)]
    options: RankOptions,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// One `DIR[,BOXES]` per line; relative paths resolve against the list
    /// file's directory. Blank lines and `#` comments are skipped.
    #[arg(long)]
    list: PathBuf,
    #[command(flatten)]
    options: RankOptions,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram CSV path; stdout when absent.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    pair: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    smoothness: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write 16-bit frames (lossless round trip).
    #[arg(long)]
    sixteen_bit: bool,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Error(Error),
    Checks(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs the CLI on `args` (program name first) and returns the exit code:
/// 0 on success, 1 on errors or failed checks, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    configure_threads();

    let outcome = match cli.command {
        Command::Rank(a) => rank(a),
        Command::RankCorpus(a) => rank_corpus(a),
        Command::Flow(a) => flow(a),
        Command::Synth(a) => synth(a),
        Command::AlignCheck(a) => check(align_check(a.seed), a.out.as_deref()),
        Command::FuseCheck(a) => check(fuse_check(a.seed), a.out.as_deref()),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
        Err(Failure::Checks(names)) => {
            eprintln!("failed checks: {}", names.join(", "));
            EXIT_FAILURE
        }
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> camflow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn flow_params(smoothness: Option<f64>) -> DenseFlowParams {
    let mut p = DenseFlowParams::default();
    if let Some(s) = smoothness {
        p.smoothness = s;
    }
    p
}

fn rank_one(frames: &Path, boxes: Option<&Path>, options: &RankOptions) -> camflow::Result<RankingRow> {
    let seq = load_frames(frames)?;
    let (h, w) = seq.dims();
    let ann = match boxes {
        Some(b) => load_annotations(b, h, w)?,
        None => Annotations::default(),
    };
    let (rank, flags, method) = match options.method {
        MethodArg::Flow => {
            let params = FlowRankParams {
                flow: flow_params(options.smoothness),
                denominator: match options.denominator {
                    DenominatorArg::All => Denominator::All,
                    DenominatorArg::Unmasked => Denominator::Unmasked,
                },
            };
            let r = rank_video_flow(&seq, &ann, &params)?;
            (r.rank, r.flags, Method::Flow)
        }
        MethodArg::Stabilize => {
            if !ann.is_empty() {
                log::info!("boxes are ignored by the stabilization method");
            }
            let r = rank_video_stabilize(&seq, &StabilizeParams::default())?;
            (r.rank, r.flags, Method::Stabilize)
        }
    };
    Ok(RankingRow {
        video: seq.id().to_string(),
        rank,
        nframes: seq.len(),
        method,
        flags: flags.iter().map(ToString::to_string).collect(),
    })
}

fn rank(a: RankArgs) -> Outcome {
    let row = rank_one(&a.frames, a.boxes.as_deref(), &a.options)?;
    let report = build_report(vec![row], 1)?;
    write_or_print(a.out.as_deref(), &report.to_json().map_err(Error::from)?)?;
    Ok(())
}

/// `DIR[,BOXES]` entries of a list file, resolved against `base`.
fn parse_list(text: &str, list: &Path) -> camflow::Result<Vec<(PathBuf, Option<PathBuf>)>> {
    let base = list.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let dir = parts.next().filter(|d| !d.is_empty());
        let boxes = parts.next().filter(|b| !b.is_empty());
        let (Some(dir), None) = (dir, parts.next()) else {
            return Err(Error::format(list, Some(i + 1), "expected DIR or DIR,BOXES"));
        };
        out.push((base.join(dir), boxes.map(|b| base.join(b))));
    }
    if out.is_empty() {
        return Err(Error::format(list, None, "no videos listed"));
    }
    Ok(out)
}

fn rank_corpus(a: CorpusArgs) -> Outcome {
    let text = fs::read_to_string(&a.list).map_err(|e| Error::io(&a.list, e))?;
    let entries = parse_list(&text, &a.list)?;
    let rows: Vec<RankingRow> = entries
        .par_iter()
        .map(|(dir, boxes)| rank_one(dir, boxes.as_deref(), &a.options))
        .collect::<camflow::Result<_>>()?;
    let report = build_report(rows, a.bins)?;
    write_or_print(a.out.as_deref(), &report.to_json().map_err(Error::from)?)?;
    write_or_print(a.histogram.as_deref(), &report.histogram_csv())?;
    Ok(())
}

fn flow(a: FlowArgs) -> Outcome {
    let seq = load_frames(&a.frames)?;
    if a.pair + 1 >= seq.len() {
        return Err(Error::Argument(format!(
            "pair {} needs frames {} and {}, the sequence has {}",
            a.pair,
            a.pair,
            a.pair + 1,
            seq.len()
        ))
        .into());
    }
    let r = dense_flow(seq.frame(a.pair), seq.frame(a.pair + 1), &flow_params(a.smoothness))?;
    if r.degenerate {
        log::warn!("pair {}: both frames are textureless, flow is zero", a.pair);
    }
    flo::write(&a.out, &r.field)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let text = fs::read_to_string(&a.spec).map_err(|e| Error::io(&a.spec, e))?;
    let spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| Error::format(&a.spec, Some(e.line()), e.to_string()))?;
    let video = generate_synth(&spec)?;
    let depth = if a.sixteen_bit {
        BitDepth::Sixteen
    } else {
        BitDepth::Eight
    };
    save_frames(&video.frames, &a.out, depth)?;
    save_annotations(a.out.join("boxes.csv"), &video.boxes)?;
    let truth = serde_json::json!({
        "id": spec.id,
        "nframes": spec.frames,
        "displacements": video.displacements.iter().map(|d| [d.0, d.1]).collect::<Vec<_>>(),
        "magnitudes": video.displacements.iter().map(|d| d.0.hypot(d.1)).collect::<Vec<_>>(),
        "true_rank": video.true_rank,
    });
    let path = a.out.join("truth.json");
    fs::write(&path, serde_json::to_string_pretty(&truth).map_err(Error::from)?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn check(report: camflow::Result<CheckReport>, out: Option<&Path>) -> Outcome {
    let report = report?;
    write_or_print(out, &report.to_json().map_err(Error::from)?)?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Checks(
            report.failures().into_iter().map(String::from).collect(),
        ))
    }
}
