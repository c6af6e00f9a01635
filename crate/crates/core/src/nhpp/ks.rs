use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::NhppError;
use crate::num::{exp, sqrt};

/// Reference distribution for [`ks_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceCdf {
    StdExponential,
    Uniform01,
}

impl ReferenceCdf {
    pub fn cdf(self, x: f64) -> f64 {
        match self {
            ReferenceCdf::StdExponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-x)
                }
            }
            ReferenceCdf::Uniform01 => x.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `sup_x |F_n(x) - F(x)|`.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

const SERIES_TOL: f64 = 1e-12;

/// `P(K > x)` for the Kolmogorov distribution. Uses the theta-function form
/// below `x = 1.18`, where the alternating series converges slowly.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    if x < 1.18 {
        // K(x) = sqrt(2π)/x Σ_{k>=1} exp(-(2k-1)² π² / (8x²))
        let mut sum = 0.0;
        let mut k = 1u32;
        loop {
            let odd = (2 * k - 1) as f64;
            let term = exp(-odd * odd * PI * PI / (8.0 * x * x));
            sum += term;
            if term < SERIES_TOL || k > 1000 {
                break;
            }
            k += 1;
        }
        (1.0 - sqrt(2.0 * PI) / x * sum).clamp(0.0, 1.0)
    } else {
        // P(K > x) = 2 Σ_{k>=1} (-1)^{k-1} exp(-2k²x²)
        let mut sum = 0.0;
        let mut k = 1u32;
        loop {
            let kf = k as f64;
            let term = exp(-2.0 * kf * kf * x * x);
            sum += if k % 2 == 1 { term } else { -term };
            if term < SERIES_TOL || k > 1000 {
                break;
            }
            k += 1;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// `P(K > sqrt(n) D)`.
pub fn ks_test(samples: &[f64], reference: ReferenceCdf) -> Result<KsResult, NhppError> {
    if samples.is_empty() {
        return Err(NhppError::EmptySample);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(NhppError::NonFiniteSample);
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    crate::num::sort_floats(&mut sorted);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = reference.cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival(sqrt(n) * statistic),
        n: sorted.len(),
    })
}

/// Transforms arrivals on `[a, b]` into variables that are i.i.d. standard
/// exponential when the arrivals come from a stationary Poisson process:
/// `R_j = (n + 1 - j) * (-ln((b - t_j) / (b - t_{j-1})))` with `t_0 = a`.
///
/// An arrival exactly at `b` yields `+∞`.
pub fn exp_residuals(arrival_times: &[f64], a: f64, b: f64) -> Result<Vec<f64>, NhppError> {
    if arrival_times.is_empty() {
        return Err(NhppError::EmptySample);
    }
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(NhppError::InvalidHorizon { start: a, end: b });
    }
    let mut prev = a;
    let n = arrival_times.len();
    let mut out = Vec::with_capacity(n);
    for (idx, &t) in arrival_times.iter().enumerate() {
        if !(t >= prev && t <= b) {
            if !(t >= a && t <= b) {
                return Err(NhppError::ArrivalOutsideHorizon(t));
            }
            return Err(NhppError::UnsortedArrivals);
        }
        let weight = (n - idx) as f64;
        let residual = if t == b {
            f64::INFINITY
        } else {
            -weight * libm::log1p(-(t - prev) / (b - prev))
        };
        // -0.0 when t == prev
        out.push(residual + 0.0);
        prev = t;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_uniform() {
        let r = ks_test(&[0.5], ReferenceCdf::Uniform01).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn quantile_grid_statistic() {
        // Brute force: D = max over the jump points of both one-sided gaps.
        let n = 10;
        let xs: Vec<f64> = (1..=n).map(|k| (2 * k - 1) as f64 / (2 * n) as f64).collect();
        let mut brute: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            brute = brute.max(((i + 1) as f64 / n as f64 - x).abs());
            brute = brute.max((x - i as f64 / n as f64).abs());
        }
        let r = ks_test(&xs, ReferenceCdf::Uniform01).unwrap();
        assert!((brute - 0.05).abs() < 1e-15);
        assert!((r.statistic - 0.05).abs() < 1e-15);
    }

    #[test]
    fn empty_and_non_finite_samples() {
        assert_eq!(ks_test(&[], ReferenceCdf::Uniform01), Err(NhppError::EmptySample));
        assert_eq!(ks_test(&[f64::INFINITY], ReferenceCdf::Uniform01), Err(NhppError::NonFiniteSample));
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Classical critical values of the Kolmogorov distribution.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2239) - 0.10).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        // the two branches agree where they meet
        let lo = kolmogorov_survival(1.18 - 1e-12);
        let hi = kolmogorov_survival(1.18);
        assert!((lo - hi).abs() < 1e-9);
        assert!(kolmogorov_survival(0.2) > 0.999_999);
    }

    #[test]
    fn midpoint_residual() {
        let r = exp_residuals(&[5.0], 0.0, 10.0).unwrap();
        assert!((r[0] - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn clustered_at_start_gives_zeros() {
        let r = exp_residuals(&[0.0; 20], 0.0, 1.0).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
        let ks = ks_test(&r, ReferenceCdf::StdExponential).unwrap();
        assert_eq!(ks.statistic, 1.0);
        assert!(ks.p_value < 1e-6);
    }

    #[test]
    fn arrival_at_end_is_infinite() {
        let r = exp_residuals(&[0.5, 1.0], 0.0, 1.0).unwrap();
        assert!(r[1].is_infinite());
    }

    #[test]
    fn unsorted_rejected() {
        assert_eq!(exp_residuals(&[0.6, 0.5], 0.0, 1.0), Err(NhppError::UnsortedArrivals));
        assert!(exp_residuals(&[2.0], 0.0, 1.0).is_err());
        assert!(exp_residuals(&[], 0.0, 1.0).is_err());
    }
}
