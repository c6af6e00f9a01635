//! Non-homogeneous Poisson arrivals: piecewise-constant rates, their
//! integrals, and the interval-by-interval Kolmogorov-Smirnov stationarity
//! sweep used to check that admissions are Poisson with a piecewise-constant
//! rate.

mod ks;
mod rate;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ks::{exp_residuals, kolmogorov_survival, ks_test, KsResult, ReferenceCdf};
pub use rate::{estimate_piecewise_rate, integrate_rate, PiecewiseRate};

/// Intervals with fewer arrivals are left out of a sweep row's denominator.
pub const DEFAULT_MIN_EVENTS: usize = 5;
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Share of intervals that must pass for a scale to count as stationary.
pub const STATIONARY_SHARE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NhppError {
    #[error("invalid rate: {0}")]
    InvalidRate(&'static str),
    #[error("invalid horizon [{start}, {end}]")]
    InvalidHorizon { start: f64, end: f64 },
    #[error("interval length must be positive, got {0}")]
    InvalidIntervalLength(f64),
    #[error("arrival time {0} lies outside the horizon")]
    ArrivalOutsideHorizon(f64),
    #[error("arrival times must be sorted ascending")]
    UnsortedArrivals,
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("interval count must be at least 1")]
    ZeroIntervals,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

/// One row of the stationarity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaritySweepRow {
    pub interval_count: usize,
    pub interval_length_days: f64,
    /// Share of tested intervals whose KS p-value is at least `alpha`.
    pub fraction_not_rejected: f64,
    pub tested_intervals: usize,
    pub excluded_intervals: usize,
}

/// Per-interval outcome, kept for the diagnostics sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDiagnostic {
    pub interval_count: usize,
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub arrivals: usize,
    /// `tested`, `excluded_min_events` or `degenerate`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<StationaritySweepRow>,
    /// Longest interval length (first in decreasing-length order) at which
    /// at least 90% of tested intervals pass; `None` if no scale does.
    pub stationary_interval_length: Option<f64>,
    pub diagnostics: Vec<IntervalDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub alpha: f64,
    pub min_events: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alpha: DEFAULT_ALPHA,
            min_events: DEFAULT_MIN_EVENTS,
        }
    }
}

/// Splits `[a, b]` into each requested number of equal intervals and tests
/// every interval for a stationary Poisson rate (KS on the exponential
/// residuals). Arrivals on an inner boundary belong to the later interval.
pub fn stationarity_sweep(
    arrival_times: &[f64],
    horizon: (f64, f64),
    interval_counts: &[usize],
    config: SweepConfig,
) -> Result<SweepOutcome, NhppError> {
    let (a, b) = horizon;
    if arrival_times.is_empty() {
        return Err(NhppError::EmptySample);
    }
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(NhppError::InvalidHorizon { start: a, end: b });
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(NhppError::InvalidAlpha(config.alpha));
    }
    let mut sorted = arrival_times.to_vec();
    crate::num::sort_floats(&mut sorted);
    if let Some(&t) = sorted.iter().find(|&&t| !(t >= a && t <= b)) {
        return Err(NhppError::ArrivalOutsideHorizon(t));
    }

    let mut rows = Vec::with_capacity(interval_counts.len());
    let mut diagnostics = Vec::new();
    for &k in interval_counts {
        if k == 0 {
            return Err(NhppError::ZeroIntervals);
        }
        let length = (b - a) / k as f64;
        let mut tested = 0usize;
        let mut passed = 0usize;
        let mut excluded = 0usize;
        let mut cursor = 0usize;
        for idx in 0..k {
            let start = a + idx as f64 * length;
            let end = if idx + 1 == k { b } else { a + (idx + 1) as f64 * length };
            let first = cursor;
            while cursor < sorted.len() && (sorted[cursor] < end || idx + 1 == k) {
                cursor += 1;
            }
            let slice = &sorted[first..cursor];
            let mut diag = IntervalDiagnostic {
                interval_count: k,
                index: idx,
                start,
                end,
                arrivals: slice.len(),
                status: String::from("tested"),
                statistic: None,
                p_value: None,
                rejected: false,
            };
            if slice.len() < config.min_events.max(1) {
                excluded += 1;
                diag.status = String::from("excluded_min_events");
            } else {
                tested += 1;
                let residuals = exp_residuals(slice, start, end)?;
                if residuals.iter().any(|r| !r.is_finite()) {
                    diag.status = String::from("degenerate");
                    diag.rejected = true;
                } else {
                    let ks = ks_test(&residuals, ReferenceCdf::StdExponential)?;
                    diag.statistic = Some(ks.statistic);
                    diag.p_value = Some(ks.p_value);
                    diag.rejected = ks.p_value < config.alpha;
                    if !diag.rejected {
                        passed += 1;
                    }
                }
            }
            diagnostics.push(diag);
        }
        let fraction = if tested == 0 { 0.0 } else { passed as f64 / tested as f64 };
        rows.push(StationaritySweepRow {
            interval_count: k,
            interval_length_days: length,
            fraction_not_rejected: fraction,
            tested_intervals: tested,
            excluded_intervals: excluded,
        });
    }

    let mut by_length: Vec<&StationaritySweepRow> = rows.iter().collect();
    by_length.sort_by(|x, y| y.interval_length_days.total_cmp(&x.interval_length_days));
    let stationary_interval_length = by_length
        .into_iter()
        .find(|r| r.tested_intervals > 0 && r.fraction_not_rejected >= STATIONARY_SHARE)
        .map(|r| r.interval_length_days);

    Ok(SweepOutcome {
        rows,
        stationary_interval_length,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn doubling_rate_rejected_at_one_interval() {
        // 2 arrivals/day on [0, 50), 4/day on [50, 100], evenly spaced
        let mut t: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) * 0.5).collect();
        t.extend((0..200).map(|k| 50.0 + (k as f64 + 0.5) * 0.25));
        let out = stationarity_sweep(&t, (0.0, 100.0), &[1], SweepConfig::default()).unwrap();
        assert_eq!(out.rows[0].fraction_not_rejected, 0.0);
        assert_eq!(out.rows[0].tested_intervals, 1);
        assert_eq!(out.stationary_interval_length, None);
    }

    #[test]
    fn sparse_intervals_are_excluded() {
        let t = vec![0.1, 0.2, 0.3, 0.4, 0.5, 9.5];
        let out = stationarity_sweep(&t, (0.0, 10.0), &[10], SweepConfig::default()).unwrap();
        let row = &out.rows[0];
        assert_eq!(row.tested_intervals, 1);
        assert_eq!(row.excluded_intervals, 9);
        assert_eq!(out.diagnostics.len(), 10);
    }

    #[test]
    fn more_intervals_than_arrivals() {
        let t = vec![1.0, 2.0, 3.0];
        let out = stationarity_sweep(&t, (0.0, 10.0), &[20], SweepConfig::default()).unwrap();
        assert_eq!(out.rows[0].tested_intervals, 0);
        assert_eq!(out.rows[0].excluded_intervals, 20);
        assert_eq!(out.rows[0].fraction_not_rejected, 0.0);
    }

    #[test]
    fn argument_errors() {
        assert_eq!(
            stationarity_sweep(&[], (0.0, 1.0), &[1], SweepConfig::default()),
            Err(NhppError::EmptySample)
        );
        assert!(stationarity_sweep(&[2.0], (0.0, 1.0), &[1], SweepConfig::default()).is_err());
        assert!(stationarity_sweep(&[0.5], (0.0, 1.0), &[0], SweepConfig::default()).is_err());
    }

    #[test]
    fn boundary_arrival_goes_to_later_interval() {
        let t = vec![5.0];
        let cfg = SweepConfig { alpha: 0.05, min_events: 1 };
        let out = stationarity_sweep(&t, (0.0, 10.0), &[2], cfg).unwrap();
        assert_eq!(out.diagnostics[0].arrivals, 0);
        assert_eq!(out.diagnostics[1].arrivals, 1);
    }

    #[test]
    fn arrival_at_horizon_end_is_degenerate() {
        let t = vec![1.0, 2.0, 3.0, 4.0, 10.0];
        let out = stationarity_sweep(&t, (0.0, 10.0), &[1], SweepConfig::default()).unwrap();
        assert_eq!(out.diagnostics[0].status, "degenerate");
        assert!(out.diagnostics[0].rejected);
    }
}
