//! Named pass/fail checks with the measured value and its tolerance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: BTreeMap<String, Check>,
    /// Free-form numeric context, e.g. weight statistics.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stats: BTreeMap<String, f64>,
}

impl CheckReport {
    /// Records a check that passes when `measured <= tolerance`.
    pub fn at_most(&mut self, name: &str, measured: f64, tolerance: f64) -> bool {
        self.record(name, measured <= tolerance, measured, tolerance)
    }

    /// Records a check that passes when `measured >= threshold`.
    pub fn at_least(&mut self, name: &str, measured: f64, threshold: f64) -> bool {
        self.record(name, measured >= threshold, measured, threshold)
    }

    pub fn record(&mut self, name: &str, pass: bool, measured: f64, tolerance: f64) -> bool {
        self.checks.insert(
            name.to_string(),
            Check {
                pass,
                measured,
                tolerance,
            },
        );
        pass
    }

    pub fn stat(&mut self, name: &str, value: f64) {
        self.stats.insert(name.to_string(), value);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_fail_bookkeeping() {
        let mut r = CheckReport::default();
        assert!(r.at_most("small", 1e-13, 1e-12));
        assert!(!r.at_least("big", 0.5, 0.9));
        assert!(!r.all_pass());
        assert_eq!(r.failures(), vec!["big"]);
        let back: CheckReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
