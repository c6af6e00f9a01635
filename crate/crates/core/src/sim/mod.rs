//! Discrete-event M_t/G/∞ simulation: NHPP arrivals by thinning, per-patient
//! length of stay, departures, interaction counts and PPE consumption.
//!
//! Every replication owns an RNG stream derived from `(seed, replication)`;
//! within a replication each class and each patient get their own child
//! stream, so adding a class leaves the other classes' draws untouched.

mod generator;

pub use generator::{
    generate_synthetic_dataset, three_class_spec, GeneratorClass, GeneratorSpec, RateShape, SyntheticDataset,
    DEFAULT_EPOCH_MINUTES,
};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_scenario_at, ArrivalEstimator, ByInteraction, ByPpe, InteractionType, PpeType, QuantileForecast,
    QuantileLabel, Scenario, Violation, ViolationCode,
};
use crate::nhpp::{integrate_rate, NhppError, PiecewiseRate};
use crate::num::{derive_seed, ln, Moments, RunningMoments};

/// Standard normal 75th percentile.
const Z75: f64 = 0.674_489_750_196_081_7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid LoS distribution: {0}")]
    InvalidLos(&'static str),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("replication count must be at least 1")]
    ZeroReplications,
    #[error("scenario is invalid ({} violation(s))", .0.len())]
    InvalidScenario(Vec<Violation>),
    #[error("class {0}: no LoS distribution and its quartiles cannot be fitted")]
    NoLosDistribution(u32),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(&'static str),
    #[error(transparent)]
    Nhpp(#[from] NhppError),
}

/// Length-of-stay distribution `G` (days).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LosDistribution {
    Deterministic { days: f64 },
    /// `exp(N(mu, sigma²))`.
    Lognormal { mu: f64, sigma: f64 },
    Exponential { mean: f64 },
    /// Uniform draw from the listed stays.
    Empirical { samples: Vec<f64> },
}

impl LosDistribution {
    /// Lognormal with median `median` and interquartile ratio `q3 / q1`.
    pub fn lognormal_from_quartiles(q1: f64, median: f64, q3: f64) -> Result<Self, SimError> {
        if !(q1 > 0.0 && median > 0.0 && q3 > q1 && q1.is_finite() && q3.is_finite()) {
            return Err(SimError::InvalidLos("quartiles must satisfy 0 < q1 < q3"));
        }
        Ok(LosDistribution::Lognormal {
            mu: ln(median),
            sigma: ln(q3 / q1) / (2.0 * Z75),
        })
    }

    /// Lognormal matching a 4.83-day median with quartiles 2.58 and 9.54.
    pub fn calibrated_default() -> Self {
        LosDistribution::lognormal_from_quartiles(2.58, 4.83, 9.54).expect("valid quartiles")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = match self {
            LosDistribution::Deterministic { days } => days.is_finite() && *days > 0.0,
            LosDistribution::Lognormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && *sigma >= 0.0,
            LosDistribution::Exponential { mean } => mean.is_finite() && *mean > 0.0,
            LosDistribution::Empirical { samples } => {
                !samples.is_empty() && samples.iter().all(|s| s.is_finite() && *s > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidLos("parameters must give a strictly positive, finite support"))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LosDistribution::Deterministic { days } => *days,
            LosDistribution::Lognormal { mu, sigma } => crate::num::exp(mu + sigma * sigma / 2.0),
            LosDistribution::Exponential { mean } => *mean,
            LosDistribution::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// One draw. Assumes [`validate`](Self::validate) passed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LosDistribution::Deterministic { days } => *days,
            LosDistribution::Lognormal { mu, sigma } => {
                if *sigma == 0.0 {
                    crate::num::exp(*mu)
                } else {
                    LogNormal::new(*mu, *sigma).expect("validated").sample(rng)
                }
            }
            LosDistribution::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            LosDistribution::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }
}

/// Arrivals of a Poisson process with intensity `rate` on `[a, b)`, by
/// Lewis-Shedler thinning against the largest piece rate overlapping the
/// window. Sorted ascending.
pub fn simulate_nhpp_on<R: Rng + ?Sized>(rate: &PiecewiseRate, a: f64, b: f64, rng: &mut R) -> Vec<f64> {
    let (lo_support, hi_support) = rate.support();
    let lo = a.max(lo_support);
    let hi = b.min(hi_support);
    if !(hi > lo) {
        return Vec::new();
    }
    let envelope = rate
        .pieces()
        .filter(|&(s, e, _)| e > lo && s < hi)
        .map(|(_, _, r)| r)
        .fold(0.0, f64::max);
    if !(envelope > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut t = lo;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap / envelope;
        if t >= hi {
            break;
        }
        let u: f64 = rng.random();
        if u * envelope < rate.rate_at(t) {
            out.push(t);
        }
    }
    out
}

/// Arrivals on `[0, T)` from a stream seeded with `seed`.
pub fn simulate_nhpp(rate: &PiecewiseRate, horizon_days: f64, seed: u64) -> Result<Vec<f64>, SimError> {
    check_horizon(horizon_days)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(simulate_nhpp_on(rate, 0.0, horizon_days, &mut rng))
}

fn check_horizon(t: f64) -> Result<(), SimError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidHorizon(t))
    }
}

/// Counts and PPE use of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub arrivals: u64,
    /// Departures falling in `[0, T]`.
    pub departures: u64,
    /// Interactions of patients departing in `[0, T]`, summed over classes.
    pub interactions: ByInteraction<f64>,
    /// Staff baseline plus patient-driven use.
    pub ppe: ByPpe<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub replications: usize,
    pub seed: u64,
    pub arrivals: Moments,
    pub departures: Moments,
    pub ppe: ByPpe<Moments>,
    pub per_replication: Vec<ReplicationOutcome>,
}

impl SimulationSummary {
    /// Aggregates outcomes listed in replication order.
    pub fn from_outcomes(seed: u64, outcomes: Vec<ReplicationOutcome>) -> Self {
        let mut arrivals = RunningMoments::default();
        let mut departures = RunningMoments::default();
        let mut ppe: ByPpe<RunningMoments> = ByPpe::default();
        for o in &outcomes {
            arrivals.push(o.arrivals as f64);
            departures.push(o.departures as f64);
            for p in PpeType::ALL {
                ppe[p].push(o.ppe[p]);
            }
        }
        SimulationSummary {
            replications: outcomes.len(),
            seed,
            arrivals: arrivals.summary(),
            departures: departures.summary(),
            ppe: ppe.map(|_, m| m.summary()),
            per_replication: outcomes,
        }
    }
}

fn replication_rng(seed: u64, replication: usize) -> u64 {
    derive_seed(seed, replication as u64)
}

/// One replication of [`simulate_departures`].
pub fn departure_replication(
    rate: &PiecewiseRate,
    los: &LosDistribution,
    horizon_days: f64,
    seed: u64,
    replication: usize,
) -> ReplicationOutcome {
    let stream = replication_rng(seed, replication);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    // Arrivals before 0 are kept when the rate is defined there.
    let start = rate.support().0.min(0.0);
    let times = simulate_nhpp_on(rate, start, horizon_days, &mut rng);
    let mut departures = 0u64;
    for &t in &times {
        let d = t + los.sample(&mut rng);
        if (0.0..=horizon_days).contains(&d) {
            departures += 1;
        }
    }
    ReplicationOutcome {
        arrivals: times.len() as u64,
        departures,
        interactions: ByInteraction::default(),
        ppe: ByPpe::default(),
    }
}

/// Departure counts in `[0, T]` of an M_t/G/∞ queue, `reps` times.
pub fn simulate_departures(
    rate: &PiecewiseRate,
    los: &LosDistribution,
    horizon_days: f64,
    reps: usize,
    seed: u64,
) -> Result<SimulationSummary, SimError> {
    check_horizon(horizon_days)?;
    los.validate()?;
    if reps == 0 {
        return Err(SimError::ZeroReplications);
    }
    let outcomes = (0..reps)
        .map(|r| departure_replication(rate, los, horizon_days, seed, r))
        .collect();
    Ok(SimulationSummary::from_outcomes(seed, outcomes))
}

/// How each class's LoS is drawn.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LosModel {
    /// LoS pinned to the scenario's selected quantile.
    #[default]
    Conditional,
    /// LoS drawn from `G_i`. Classes missing from the map use a lognormal
    /// fitted to their Q1/median/Q3.
    Unconditional {
        #[serde(default)]
        distributions: BTreeMap<u32, LosDistribution>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionModel {
    /// Poisson counts with mean `c_j` per day of stay.
    #[default]
    Poisson,
    /// Exactly `c_j × LoS` interactions (real-valued).
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalModel {
    #[default]
    Poisson,
    /// `round(Λ)` arrivals placed at `Λ⁻¹(k - 1/2)`, where `Λ` is the
    /// cumulative intensity on `[0, T]`.
    Pinned,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulationConfig {
    #[serde(default)]
    pub los: LosModel,
    #[serde(default)]
    pub interactions: InteractionModel,
    #[serde(default)]
    pub arrivals: ArrivalModel,
}

#[derive(Debug, Clone)]
struct ClassPlan {
    class_id: u32,
    rate: PiecewiseRate,
    pinned: Option<Vec<f64>>,
    los: LosDistribution,
    daily_rates: ByInteraction<f64>,
    usage_rows: ByPpe<ByInteraction<f64>>,
}

/// A scenario compiled for simulation. Build once, then run replications
/// (possibly in parallel) with [`ppe_replication`].
#[derive(Debug, Clone)]
pub struct PpePlan {
    horizon_days: f64,
    staff: ByPpe<f64>,
    interactions: InteractionModel,
    classes: Vec<ClassPlan>,
}

impl PpePlan {
    pub fn new(s: &Scenario, config: &SimulationConfig) -> Result<Self, SimError> {
        let label = s.quantile_selection;
        let violations: Vec<Violation> = validate_scenario_at(s, label)
            .into_iter()
            .filter(|v| v.code != ViolationCode::NoClasses)
            .collect();
        if !violations.is_empty() {
            return Err(SimError::InvalidScenario(violations));
        }
        let t = s.horizon_days;
        let mut classes = Vec::with_capacity(s.classes.len());
        for profile in &s.classes {
            let sigma = profile.sigma(label).expect("validated");
            let rate = match s.arrival_estimator {
                // constant intensity whose integral over [0, T - σ] is the
                // discharge count
                ArrivalEstimator::DischargeCount => {
                    PiecewiseRate::constant(s.arrival_scale * profile.annual_discharges / (t - sigma), 0.0, t)?
                }
                ArrivalEstimator::RateIntegral => {
                    profile.arrival_rate.as_ref().expect("validated").scaled(s.arrival_scale)?
                }
            };
            let los = match &config.los {
                LosModel::Conditional => LosDistribution::Deterministic { days: sigma },
                LosModel::Unconditional { distributions } => match distributions.get(&profile.class_id) {
                    Some(d) => d.clone(),
                    None => {
                        let q = |l| profile.sigma(l).ok_or(SimError::NoLosDistribution(profile.class_id));
                        let (q1, med, q3) = (q(QuantileLabel::Q1)?, q(QuantileLabel::Median)?, q(QuantileLabel::Q3)?);
                        if q1 == q3 {
                            LosDistribution::Deterministic { days: med }
                        } else {
                            LosDistribution::lognormal_from_quartiles(q1, med, q3)
                                .map_err(|_| SimError::NoLosDistribution(profile.class_id))?
                        }
                    }
                },
            };
            los.validate()?;
            let pinned = match config.arrivals {
                ArrivalModel::Poisson => None,
                ArrivalModel::Pinned => Some(pinned_arrivals(&rate, t)),
            };
            classes.push(ClassPlan {
                class_id: profile.class_id,
                rate,
                pinned,
                los,
                daily_rates: profile.daily_rates,
                usage_rows: ByPpe::from_fn(|p| *s.usage.usage[p].row(profile.class_id)),
            });
        }
        Ok(PpePlan {
            horizon_days: t,
            staff: crate::forecast::staff_baseline(&s.usage, t),
            interactions: config.interactions,
            classes,
        })
    }
}

fn pinned_arrivals(rate: &PiecewiseRate, horizon: f64) -> Vec<f64> {
    let total = integrate_rate(rate, 0.0, horizon);
    let n = crate::num::round(total) as u64;
    let offset = integrate_rate(rate, f64::NEG_INFINITY, 0.0);
    (1..=n)
        .filter_map(|k| rate.inverse_cumulative(offset + k as f64 - 0.5))
        .filter(|&t| t < horizon)
        .collect()
}

/// One replication of [`simulate_ppe`].
pub fn ppe_replication(plan: &PpePlan, seed: u64, replication: usize) -> ReplicationOutcome {
    let t_end = plan.horizon_days;
    let rep_seed = replication_rng(seed, replication);
    let mut arrivals = 0u64;
    let mut departures = 0u64;
    let mut interactions = ByInteraction::<f64>::default();
    let mut ppe = plan.staff;
    for class in &plan.classes {
        let class_seed = derive_seed(rep_seed, class.class_id as u64);
        let times = match &class.pinned {
            Some(times) => times.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(class_seed);
                simulate_nhpp_on(&class.rate, 0.0, t_end, &mut rng)
            }
        };
        arrivals += times.len() as u64;
        let mut counts = [0.0f64; InteractionType::COUNT];
        for (k, &t) in times.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(class_seed ^ 0x5EED, k as u64));
            let los = class.los.sample(&mut rng);
            let d = t + los;
            if !(0.0..=t_end).contains(&d) {
                continue;
            }
            departures += 1;
            for j in InteractionType::ALL {
                let mean = class.daily_rates[j] * los;
                if !(mean > 0.0) {
                    continue;
                }
                counts[j.index()] += match plan.interactions {
                    InteractionModel::Deterministic => mean,
                    InteractionModel::Poisson => Poisson::new(mean).expect("positive mean").sample(&mut rng),
                };
            }
        }
        for p in PpeType::ALL {
            let row = &class.usage_rows[p];
            ppe[p] += InteractionType::ALL
                .iter()
                .map(|&j| counts[j.index()] * row[j])
                .sum::<f64>();
        }
        for j in InteractionType::ALL {
            interactions[j] += counts[j.index()];
        }
    }
    ReplicationOutcome {
        arrivals,
        departures,
        interactions,
        ppe,
    }
}

/// Monte Carlo PPE consumption over `[0, T]` for a scenario.
pub fn simulate_ppe(
    s: &Scenario,
    config: &SimulationConfig,
    reps: usize,
    seed: u64,
) -> Result<SimulationSummary, SimError> {
    if reps == 0 {
        return Err(SimError::ZeroReplications);
    }
    let plan = PpePlan::new(s, config)?;
    let outcomes = (0..reps).map(|r| ppe_replication(&plan, seed, r)).collect();
    Ok(SimulationSummary::from_outcomes(seed, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub closed_form: f64,
    pub simulated_mean: f64,
    pub std_error: f64,
    /// `(simulated - closed_form) / SE`; absent when SE is zero.
    pub z_score: Option<f64>,
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub quantile: QuantileLabel,
    pub replications: usize,
    pub ppe: ByPpe<OracleRow>,
    pub all_within_3se: bool,
}

impl Default for OracleRow {
    fn default() -> Self {
        OracleRow {
            closed_form: 0.0,
            simulated_mean: 0.0,
            std_error: 0.0,
            z_score: None,
            within_3se: true,
        }
    }
}

/// Compares simulated means against a closed-form row (pre-reuse totals).
/// With zero standard error the two must agree to 1e-9 relative.
pub fn compare_to_forecast(summary: &SimulationSummary, row: &QuantileForecast) -> OracleComparison {
    let ppe = ByPpe::from_fn(|p| {
        let closed_form = row.ppe[p].total;
        let m = summary.ppe[p];
        let diff = m.mean - closed_form;
        let (z_score, within_3se) = if m.std_error > 0.0 {
            let z = diff / m.std_error;
            (Some(z), z.abs() <= 3.0)
        } else {
            (None, diff.abs() <= 1e-9 * closed_form.abs().max(1.0))
        };
        OracleRow {
            closed_form,
            simulated_mean: m.mean,
            std_error: m.std_error,
            z_score,
            within_3se,
        }
    });
    let all_within_3se = ppe.iter().all(|(_, r)| r.within_3se);
    OracleComparison {
        quantile: row.quantile,
        replications: summary.replications,
        ppe,
        all_within_3se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::forecast::expected_demand;
    use crate::model::PpeUsageConfig;

    fn within_3se(m: &Moments, target: f64) -> bool {
        (m.mean - target).abs() <= 3.0 * m.std_error
    }

    #[test]
    fn constant_rate_counts_are_poisson() {
        let rate = PiecewiseRate::constant(10.0, 0.0, 100.0).unwrap();
        let mut counts = RunningMoments::default();
        for r in 0..1000u64 {
            counts.push(simulate_nhpp(&rate, 100.0, derive_seed(7, r)).unwrap().len() as f64);
        }
        let m = counts.summary();
        assert!(within_3se(&m, 1000.0), "{m:?}");
        let dispersion = m.variance / m.mean;
        assert!((0.9..=1.1).contains(&dispersion), "{dispersion}");
    }

    #[test]
    fn zero_rate_and_support() {
        let zero = PiecewiseRate::constant(0.0, 0.0, 10.0).unwrap();
        assert!(simulate_nhpp(&zero, 10.0, 1).unwrap().is_empty());
        let two = PiecewiseRate::new(vec![0.0, 50.0, 100.0], vec![0.0, 20.0]).unwrap();
        for seed in 0..50 {
            let t = simulate_nhpp(&two, 100.0, seed).unwrap();
            assert!(t.iter().all(|&x| x >= 50.0));
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(simulate_nhpp(&two, 0.0, 1).is_err());
    }

    #[test]
    fn deterministic_seeds() {
        let rate = PiecewiseRate::constant(3.0, 0.0, 30.0).unwrap();
        assert_eq!(simulate_nhpp(&rate, 30.0, 9).unwrap(), simulate_nhpp(&rate, 30.0, 9).unwrap());
        let a = simulate_departures(&rate, &LosDistribution::calibrated_default(), 30.0, 20, 4).unwrap();
        let b = simulate_departures(&rate, &LosDistribution::calibrated_default(), 30.0, 20, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn departures_deterministic_los() {
        let rate = PiecewiseRate::constant(10.0, 0.0, 100.0).unwrap();
        let s = simulate_departures(&rate, &LosDistribution::Deterministic { days: 5.0 }, 100.0, 1000, 11).unwrap();
        assert!(within_3se(&s.departures, 950.0), "{:?}", s.departures);
        for r in &s.per_replication {
            assert!(r.departures <= r.arrivals);
        }
        let none = simulate_departures(&rate, &LosDistribution::Deterministic { days: 150.0 }, 100.0, 50, 1).unwrap();
        assert_eq!(none.departures.mean, 0.0);
    }

    #[test]
    fn departures_exponential_los() {
        let rate = PiecewiseRate::constant(10.0, 0.0, 100.0).unwrap();
        let s = simulate_departures(&rate, &LosDistribution::Exponential { mean: 5.0 }, 100.0, 1000, 12).unwrap();
        let expected = 10.0 * (100.0 - 5.0 * (1.0 - crate::num::exp(-20.0)));
        assert!(within_3se(&s.departures, expected), "{:?} vs {expected}", s.departures);
    }

    #[test]
    fn quartile_fit() {
        match LosDistribution::calibrated_default() {
            LosDistribution::Lognormal { mu, sigma } => {
                assert!((crate::num::exp(mu) - 4.83).abs() < 1e-12);
                assert!((sigma - 0.9694).abs() < 1e-4);
            }
            other => panic!("{other:?}"),
        }
        assert!(LosDistribution::Empirical { samples: vec![] }.validate().is_err());
        assert!(LosDistribution::Deterministic { days: 0.0 }.validate().is_err());
    }

    fn small_scenario() -> Scenario {
        let mut rates = ByInteraction::<f64>::default();
        rates[InteractionType::VitalSigns] = 4.0;
        rates[InteractionType::MedicationAdministration] = 2.0;
        rates[InteractionType::InterventionalRadiology] = 0.1;
        let mut los = BTreeMap::new();
        los.insert(QuantileLabel::Q1, 2.0);
        los.insert(QuantileLabel::Median, 4.0);
        los.insert(QuantileLabel::Q3, 8.0);
        let class = crate::model::PatientClassProfile {
            class_id: 1,
            los_quantiles: los,
            daily_rates: rates,
            annual_discharges: 200.0,
            member_count: 0,
            arrival_rate: None,
        };
        Scenario::new(vec![class], PpeUsageConfig::hospital_default())
    }

    #[test]
    fn pinned_deterministic_matches_closed_form_exactly() {
        let s = small_scenario();
        let config = SimulationConfig {
            los: LosModel::Conditional,
            interactions: InteractionModel::Deterministic,
            arrivals: ArrivalModel::Pinned,
        };
        let sim = simulate_ppe(&s, &config, 5, 3).unwrap();
        let report = expected_demand(&s).unwrap();
        for r in &sim.per_replication {
            assert_eq!(r, &sim.per_replication[0]);
            assert_eq!(r.departures, 200);
        }
        for p in PpeType::ALL {
            let cf = report.rows[0].ppe[p].total;
            assert!((sim.ppe[p].mean - cf).abs() <= 1e-9 * cf.max(1.0), "{p}: {} vs {cf}", sim.ppe[p].mean);
            assert_eq!(sim.ppe[p].std_error, 0.0);
        }
        let cmp = compare_to_forecast(&sim, &report.rows[0]);
        assert!(cmp.all_within_3se);
    }

    #[test]
    fn conditional_poisson_matches_closed_form() {
        let s = small_scenario();
        let sim = simulate_ppe(&s, &SimulationConfig::default(), 400, 21).unwrap();
        let report = expected_demand(&s).unwrap();
        let cmp = compare_to_forecast(&sim, &report.rows[0]);
        assert!(cmp.all_within_3se, "{cmp:?}");
    }

    #[test]
    fn conservation_per_replication() {
        let s = small_scenario();
        let sim = simulate_ppe(&s, &SimulationConfig::default(), 10, 5).unwrap();
        let staff = crate::forecast::staff_baseline(&s.usage, s.horizon_days);
        for r in &sim.per_replication {
            for p in PpeType::ALL {
                let row = s.usage.usage[p].row(1);
                let patient: f64 = InteractionType::ALL.iter().map(|&j| r.interactions[j] * row[j]).sum();
                assert!((r.ppe[p] - staff[p] - patient).abs() <= 1e-9 * r.ppe[p].max(1.0));
            }
        }
    }

    #[test]
    fn adding_a_class_keeps_other_streams() {
        let s = small_scenario();
        let mut bigger = s.clone();
        let mut extra = s.classes[0].clone();
        extra.class_id = 2;
        extra.daily_rates = ByInteraction::default();
        bigger.classes.push(extra);
        let a = simulate_ppe(&s, &SimulationConfig::default(), 5, 8).unwrap();
        let b = simulate_ppe(&bigger, &SimulationConfig::default(), 5, 8).unwrap();
        for (x, y) in a.per_replication.iter().zip(&b.per_replication) {
            assert_eq!(x.ppe, y.ppe);
            assert!(y.arrivals > x.arrivals);
        }
    }

    #[test]
    fn conditional_median_below_unconditional_mean() {
        let s = small_scenario();
        let config = SimulationConfig {
            los: LosModel::Unconditional {
                distributions: BTreeMap::new(),
            },
            ..SimulationConfig::default()
        };
        let sim = simulate_ppe(&s, &config, 300, 17).unwrap();
        let report = expected_demand(&s).unwrap();
        let gloves = PpeType::Gloves;
        let m = sim.ppe[gloves];
        assert!(report.rows[0].ppe[gloves].total < m.mean - 3.0 * m.std_error);
    }

    #[test]
    fn invalid_inputs() {
        let mut s = small_scenario();
        s.horizon_days = 3.0;
        assert!(matches!(
            simulate_ppe(&s, &SimulationConfig::default(), 1, 0),
            Err(SimError::InvalidScenario(_))
        ));
        assert_eq!(
            simulate_ppe(&small_scenario(), &SimulationConfig::default(), 0, 0),
            Err(SimError::ZeroReplications)
        );
    }
}
