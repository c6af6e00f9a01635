use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::NhppError;

/// Piecewise-constant arrival intensity (arrivals/day), zero outside
/// `[breakpoints[0], breakpoints[last]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRate")]
pub struct PiecewiseRate {
    breakpoints: Vec<f64>,
    rates: Vec<f64>,
}

#[derive(Deserialize)]
struct RawRate {
    breakpoints: Vec<f64>,
    rates: Vec<f64>,
}

impl TryFrom<RawRate> for PiecewiseRate {
    type Error = NhppError;

    fn try_from(raw: RawRate) -> Result<Self, Self::Error> {
        PiecewiseRate::new(raw.breakpoints, raw.rates)
    }
}

impl PiecewiseRate {
    pub fn new(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self, NhppError> {
        if breakpoints.len() < 2 || rates.len() + 1 != breakpoints.len() {
            return Err(NhppError::InvalidRate("need n+1 breakpoints for n rates (n >= 1)"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NhppError::InvalidRate("breakpoints must be finite and strictly increasing"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(NhppError::InvalidRate("rates must be finite and non-negative"));
        }
        Ok(PiecewiseRate { breakpoints, rates })
    }

    /// A single constant piece on `[start, end]`.
    pub fn constant(rate: f64, start: f64, end: f64) -> Result<Self, NhppError> {
        PiecewiseRate::new(vec![start, end], vec![rate])
    }

    /// Equal-width pieces on `[start, end]` sampling `f` at each piece's
    /// midpoint, clamped at zero.
    pub fn sampled(start: f64, end: f64, pieces: usize, f: impl Fn(f64) -> f64) -> Result<Self, NhppError> {
        if pieces == 0 || !(end > start) {
            return Err(NhppError::InvalidRate("need at least one piece on a non-empty span"));
        }
        let width = (end - start) / pieces as f64;
        let mut breakpoints: Vec<f64> = (0..pieces).map(|k| start + k as f64 * width).collect();
        breakpoints.push(end);
        let rates = (0..pieces)
            .map(|k| f(start + (k as f64 + 0.5) * width).max(0.0))
            .collect();
        PiecewiseRate::new(breakpoints, rates)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Pieces as `(start, end, rate)`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(self.rates.iter())
            .map(|(w, &r)| (w[0], w[1], r))
    }

    /// Intensity at `t`; pieces are closed on the left.
    pub fn rate_at(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(t >= lo && t < hi) {
            return 0.0;
        }
        let idx = self.breakpoints.partition_point(|&b| b <= t) - 1;
        self.rates[idx]
    }

    /// The same rate multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self, NhppError> {
        PiecewiseRate::new(self.breakpoints.clone(), self.rates.iter().map(|r| r * factor).collect())
    }

    /// Smallest `t` with `∫_{start}^{t} λ = mass`, for `0 <= mass <= total`.
    pub fn inverse_cumulative(&self, mass: f64) -> Option<f64> {
        if !(mass >= 0.0) {
            return None;
        }
        let mut acc = 0.0;
        for (a, b, r) in self.pieces() {
            let piece = r * (b - a);
            if r > 0.0 && acc + piece >= mass {
                return Some(a + (mass - acc) / r);
            }
            acc += piece;
        }
        None
    }
}

/// `∫_a^b λ(u) du`, exact for the piecewise-constant rate and zero outside
/// its support. Returns 0 when `b <= a`.
pub fn integrate_rate(rate: &PiecewiseRate, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    rate.pieces()
        .map(|(lo, hi, r)| {
            let overlap = hi.min(b) - lo.max(a);
            if overlap > 0.0 {
                r * overlap
            } else {
                0.0
            }
        })
        .sum()
}

/// Count-per-length estimate on consecutive pieces of `interval_length_days`
/// covering `[a, b]`; the final piece ends at `b` and may be shorter.
pub fn estimate_piecewise_rate(arrival_times: &[f64], horizon: (f64, f64), interval_length_days: f64) -> Result<PiecewiseRate, NhppError> {
    let (a, b) = horizon;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(NhppError::InvalidHorizon { start: a, end: b });
    }
    if !(interval_length_days.is_finite() && interval_length_days > 0.0) {
        return Err(NhppError::InvalidIntervalLength(interval_length_days));
    }
    let pieces = (crate::num::ceil((b - a) / interval_length_days) as usize).max(1);
    let mut breakpoints: Vec<f64> = (0..pieces).map(|k| a + k as f64 * interval_length_days).collect();
    // guard against a sliver piece from rounding
    if pieces > 1 && breakpoints[pieces - 1] >= b {
        breakpoints.pop();
    }
    breakpoints.push(b);
    let n = breakpoints.len() - 1;
    let mut counts = vec![0u64; n];
    for &t in arrival_times {
        if !(t >= a && t <= b) {
            return Err(NhppError::ArrivalOutsideHorizon(t));
        }
        let idx = breakpoints.partition_point(|&x| x <= t).saturating_sub(1).min(n - 1);
        counts[idx] += 1;
    }
    let rates = counts
        .iter()
        .zip(breakpoints.windows(2))
        .map(|(&c, w)| c as f64 / (w[1] - w[0]))
        .collect();
    PiecewiseRate::new(breakpoints, rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integral() {
        let r = PiecewiseRate::constant(5.0, 0.0, 10.0).unwrap();
        assert_eq!(integrate_rate(&r, 0.0, 10.0), 50.0);
        assert_eq!(integrate_rate(&r, -5.0, 0.0), 0.0);
        assert_eq!(integrate_rate(&r, 3.0, 3.0), 0.0);
    }

    #[test]
    fn two_piece_integral() {
        let r = PiecewiseRate::new(vec![0.0, 5.0, 10.0], vec![3.0, 7.0]).unwrap();
        // 3 * 2.5 + 7 * 2.5
        assert_eq!(integrate_rate(&r, 2.5, 7.5), 25.0);
    }

    #[test]
    fn uniform_arrivals_estimate() {
        let arrivals: Vec<f64> = (0..50).map(|k| (k as f64 + 0.5) * 0.2).collect();
        let r = estimate_piecewise_rate(&arrivals, (0.0, 10.0), 10.0).unwrap();
        assert_eq!(r.rates(), &[5.0]);
    }

    #[test]
    fn empty_interval_has_zero_rate() {
        let r = estimate_piecewise_rate(&[0.5, 1.5], (0.0, 3.0), 1.0).unwrap();
        assert_eq!(r.rates(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn ragged_final_piece() {
        let r = estimate_piecewise_rate(&[0.1, 2.4, 2.45], (0.0, 2.5), 1.0).unwrap();
        assert_eq!(r.breakpoints(), &[0.0, 1.0, 2.0, 2.5]);
        assert_eq!(r.rates(), &[1.0, 0.0, 4.0]);
        assert!((integrate_rate(&r, 0.0, 2.5) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_rates_rejected() {
        assert!(PiecewiseRate::new(vec![0.0], vec![]).is_err());
        assert!(PiecewiseRate::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(PiecewiseRate::new(vec![0.0, 1.0], vec![-1.0]).is_err());
        assert!(serde_json::from_str::<PiecewiseRate>(r#"{"breakpoints":[1,0],"rates":[1]}"#).is_err());
        assert!(estimate_piecewise_rate(&[], (0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn lookup_and_inverse() {
        let r = PiecewiseRate::new(vec![0.0, 5.0, 10.0], vec![0.0, 20.0]).unwrap();
        assert_eq!(r.rate_at(-1.0), 0.0);
        assert_eq!(r.rate_at(4.99), 0.0);
        assert_eq!(r.rate_at(5.0), 20.0);
        assert_eq!(r.rate_at(10.0), 0.0);
        assert_eq!(r.inverse_cumulative(10.0), Some(5.5));
        assert_eq!(r.inverse_cumulative(101.0), None);
    }
}
