use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Flow,
    Stabilize,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Flow => "flow",
            Method::Stabilize => "stabilize",
        })
    }
}

/// One video's line in a report; serializes to the report JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub video: String,
    pub rank: f64,
    pub nframes: usize,
    pub method: Method,
    #[serde(default)]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    /// Descending by rank; ties ordered by video id.
    pub rows: Vec<RankingRow>,
    pub histogram: Vec<HistogramBin>,
}

/// Sorts rows and bins their ranks into `bins` equal-width bins spanning
/// `[0, max rank]`. The maximum lands in the last bin. When every rank is
/// zero the bins span `[0, 1]` instead.
pub fn build_report(mut rows: Vec<RankingRow>, bins: usize) -> Result<RankingReport> {
    if rows.is_empty() {
        return arg_err("cannot build a report from zero videos");
    }
    if bins == 0 {
        return arg_err("histogram needs at least one bin");
    }
    if let Some(r) = rows.iter().find(|r| !(r.rank.is_finite() && r.rank >= 0.0)) {
        return arg_err(format!("video {} has invalid rank {}", r.video, r.rank));
    }
    rows.sort_by(|a, b| b.rank.total_cmp(&a.rank).then_with(|| a.video.cmp(&b.video)));

    let max = rows[0].rank;
    let top = if max > 0.0 { max } else { 1.0 };
    let width = top / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: i as f64 * width,
            hi: if i + 1 == bins { top } else { (i + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for r in &rows {
        let i = ((r.rank / width) as usize).min(bins - 1);
        histogram[i].count += 1;
    }
    Ok(RankingReport { rows, histogram })
}

impl RankingReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.rows)
    }

    /// `bin_lo,bin_hi,count` with a header line.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for b in &self.histogram {
            let _ = writeln!(s, "{},{},{}", b.lo, b.hi, b.count);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn single_video() {
        let r = build_report(vec![row("a", 0.7)], DEFAULT_BINS).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.histogram.iter().filter(|b| b.count > 0).count(), 1);
    }

    #[test]
    fn direct_binning() {
        let r = build_report(vec![row("a", 0.0), row("b", 0.0), row("c", 5.0)], 5).unwrap();
        let counts: Vec<_> = r.histogram.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 0, 0, 0, 1]);
        assert_eq!(r.histogram[4].hi, 5.0);
        assert_eq!(r.rows[0].video, "c");
    }

    #[test]
    fn ties_break_by_id() {
        let r = build_report(vec![row("zeta", 1.0), row("alpha", 1.0), row("mid", 2.0)], 4).unwrap();
        let ids: Vec<_> = r.rows.iter().map(|r| r.video.as_str()).collect();
        assert_eq!(ids, ["mid", "alpha", "zeta"]);
        assert_eq!(r.histogram.iter().map(|b| b.count).sum::<usize>(), 3);
    }

    #[test]
    fn all_zero_ranks() {
        let r = build_report(vec![row("a", 0.0), row("b", 0.0)], 3).unwrap();
        assert_eq!(r.histogram[0].count, 2);
        assert_eq!(r.histogram[2].hi, 1.0);
    }

    #[test]
    fn outputs() {
        let mut a = row("a", 1.5);
        a.flags.push("pair 0: degenerate_flow".into());
        let r = build_report(vec![a], 2).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(json[0]["video"], "a");
        assert_eq!(json[0]["method"], "flow");
        assert_eq!(json[0]["flags"][0], "pair 0: degenerate_flow");
        assert_eq!(r.histogram_csv(), "bin_lo,bin_hi,count\n0,0.75,0\n0.75,1.5,1\n");
    }

    #[test]
    fn rejects_empty() {
        assert!(build_report(vec![], 5).is_err());
    }
}
