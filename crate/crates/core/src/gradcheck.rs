//! Central finite-difference checking of hand-written gradients.

use serde::Serialize;

use crate::error::{arg_err, Error, Result};

/// Worst-coordinate summary of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    /// `|a - n| / max(|a|, |n|, 1e-8)` at the worst coordinate.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Floor on the relative-error denominator so exact zeros compare sanely.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` against `(f(p + h e_i) - f(p - h e_i)) / 2h` for
/// every coordinate `i` of `params`.
pub fn finite_diff_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return arg_err(format!("step must be positive, got {h}"));
    }
    if params.len() != analytic.len() {
        return arg_err(format!(
            "{} parameters but {} analytic partials",
            params.len(),
            analytic.len()
        ));
    }
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: 0.0,
    };
    let mut first = true;
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe)?;
        probe[i] = orig - h;
        let minus = f(&probe)?;
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite function value probing coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        if first || err > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: err,
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
            first = false;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let rep = finite_diff_check(|p| Ok(p[0] * p[0]), &[3.0], &[6.0], 1e-4).unwrap();
        assert!(rep.max_rel_error < 1e-6, "{rep:?}");
    }

    #[test]
    fn flags_a_doubled_gradient() {
        // |2g - g| / max(|2g|, |g|) = 1/2.
        let rep = finite_diff_check(
            |p| Ok(p[0] * p[0] + p[1].sin()),
            &[1.5, 0.4],
            &[6.0, 2.0 * 0.4f64.cos()],
            1e-4,
        )
        .unwrap();
        assert!((rep.max_rel_error - 0.5).abs() < 1e-6, "{rep:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(finite_diff_check(|p| Ok(p[0]), &[1.0], &[1.0], 0.0).is_err());
        assert!(finite_diff_check(|p| Ok(p[0]), &[1.0], &[1.0, 2.0], 1e-4).is_err());
        let r = finite_diff_check(|p| Ok(1.0 / (p[0] - 1e-4)), &[0.0], &[1.0], 1e-4);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
