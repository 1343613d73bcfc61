use camflow::harness::{generate_synth, CameraPath, SpriteSpec, SynthSpec};
use camflow::rank::{
    build_report, rank_video_flow, rank_video_stabilize, Denominator, FlowRankParams, Method, PairIssue, RankingRow,
    StabilizeParams,
};

fn row(video: &str, rank: f64) -> RankingRow {
    RankingRow {
        video: video.into(),
        rank,
        nframes: 10,
        method: Method::Flow,
        flags: vec![],
    }
}

#[test]
fn textureless_video_is_flagged_not_failed() {
    let mut s = SynthSpec::new(3, 48, 48, 4, CameraPath::Jitter { amplitude: 2.0 });
    s.flat = true;
    let v = generate_synth(&s).unwrap();

    let st = rank_video_stabilize(&v.frames, &StabilizeParams::default()).unwrap();
    assert_eq!(st.rank, 0.0);
    assert_eq!(st.flags.len(), 3);
    assert!(st.flags.iter().all(|f| f.issue == PairIssue::InsufficientMatches));

    let fl = rank_video_flow(&v.frames, &v.boxes, &FlowRankParams::default()).unwrap();
    assert_eq!(fl.rank, 0.0);
    assert!(fl.flags.iter().all(|f| f.issue == PairIssue::DegenerateFlow));
    assert_eq!(fl.flags.len(), 3);
}

#[test]
fn masking_the_sprite_removes_its_motion() {
    // Static camera, moving sprite. The box only covers the sprite's
    // position in the first frame of each pair, so some motion at its
    // destination and from smoothing leaks through.
    let mut s = SynthSpec::new(4, 64, 64, 6, CameraPath::Static);
    s.sprite = Some(SpriteSpec {
        y: 10.0,
        x: 10.0,
        height: 14,
        width: 14,
        vy: 0.0,
        vx: 3.0,
    });
    let v = generate_synth(&s).unwrap();
    let params = FlowRankParams::default();
    let masked = rank_video_flow(&v.frames, &v.boxes, &params).unwrap();
    let bare = rank_video_flow(&v.frames, &Default::default(), &params).unwrap();
    let masked_mean: f64 = masked.profile.flow.iter().sum::<f64>() / 5.0;
    let bare_mean: f64 = bare.profile.flow.iter().sum::<f64>() / 5.0;
    assert!(masked_mean < 0.7 * bare_mean, "{masked_mean} vs {bare_mean}");

    let unmasked = FlowRankParams {
        denominator: Denominator::Unmasked,
        ..params
    };
    let alt = rank_video_flow(&v.frames, &v.boxes, &unmasked).unwrap();
    for (a, b) in alt.profile.flow.iter().zip(&masked.profile.flow) {
        assert!(a >= b);
    }
}

#[test]
fn report_orders_and_bins() {
    let r = build_report(vec![row("b", 1.0), row("a", 1.0), row("c", 4.0), row("d", 0.0)], 4).unwrap();
    let order: Vec<&str> = r.rows.iter().map(|r| r.video.as_str()).collect();
    assert_eq!(order, ["c", "a", "b", "d"]);
    let counts: Vec<usize> = r.histogram.iter().map(|b| b.count).collect();
    assert_eq!(counts, [1, 2, 0, 1]);
    assert_eq!(r.histogram.last().unwrap().hi, 4.0);
    assert!(r.histogram_csv().starts_with("bin_lo,bin_hi,count\n0,1,1\n"));

    let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(json[0]["video"], "c");
    assert_eq!(json[0]["method"], "flow");
    assert!(json[0]["flags"].as_array().unwrap().is_empty());

    let zeros = build_report(vec![row("x", 0.0)], 3).unwrap();
    assert_eq!(zeros.histogram[0].count, 1);
    assert!(build_report(vec![], 3).is_err());
}
