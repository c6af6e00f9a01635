//! Synthetic admissions with known classes, arrival intensities and LoS.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use super::{simulate_nhpp_on, LosDistribution, SimError};
use crate::model::{ByInteraction, IcuInterval, InteractionEvent, InteractionType, PatientRecord, Timestamp};
use crate::nhpp::PiecewiseRate;
use crate::num::{derive_seed, round, sin};

/// 2020-01-01T00:00Z in minutes since the Unix epoch.
pub const DEFAULT_EPOCH_MINUTES: i64 = 26_297_280;

/// Minimum spacing between distinct episodes of the same interaction type.
const EPISODE_GAP_MINUTES: i64 = 90;
/// Duplicate stamps land this many minutes (at most) after their episode.
const MAX_DUPLICATE_OFFSET: i64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RateShape {
    Constant {
        rate: f64,
    },
    /// `first` on `[0, split_day)`, `second` afterwards.
    TwoPiece {
        first: f64,
        second: f64,
        split_day: f64,
    },
    /// `mean + amplitude · sin(2πt / period)` sampled on
    /// `pieces_per_period` equal pieces per period.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period_days: f64,
        pieces_per_period: usize,
    },
    Piecewise {
        rate: PiecewiseRate,
    },
}

impl RateShape {
    pub fn to_rate(&self, horizon_days: f64) -> Result<PiecewiseRate, SimError> {
        let rate = match self {
            RateShape::Constant { rate } => PiecewiseRate::constant(*rate, 0.0, horizon_days)?,
            RateShape::TwoPiece {
                first,
                second,
                split_day,
            } => {
                if !(*split_day > 0.0 && *split_day < horizon_days) {
                    return Err(SimError::InvalidSpec("split_day must lie inside the horizon"));
                }
                PiecewiseRate::new(vec![0.0, *split_day, horizon_days], vec![*first, *second])?
            }
            RateShape::Sinusoidal {
                mean,
                amplitude,
                period_days,
                pieces_per_period,
            } => {
                if !(*period_days > 0.0) || *pieces_per_period == 0 {
                    return Err(SimError::InvalidSpec("sinusoid needs a positive period and pieces"));
                }
                let pieces = crate::num::ceil(horizon_days / period_days * *pieces_per_period as f64) as usize;
                PiecewiseRate::sampled(0.0, horizon_days, pieces.max(1), |t| {
                    mean + amplitude * sin(2.0 * PI * t / period_days)
                })?
            }
            RateShape::Piecewise { rate } => rate.clone(),
        };
        Ok(rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorClass {
    pub arrivals: RateShape,
    pub los: LosDistribution,
    /// Mean episodes per day of (non-ICU) stay, by type.
    pub daily_rates: ByInteraction<f64>,
    #[serde(default)]
    pub icu_probability: f64,
    #[serde(default = "default_icu_mean")]
    pub icu_mean_days: f64,
}

fn default_icu_mean() -> f64 {
    1.0
}

fn default_duplicates() -> f64 {
    0.3
}

fn default_readmission() -> f64 {
    0.3
}

fn default_epoch() -> i64 {
    DEFAULT_EPOCH_MINUTES
}

fn default_horizon() -> f64 {
    365.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(default = "default_horizon")]
    pub horizon_days: f64,
    /// Wall-clock minute of day 0.
    #[serde(default = "default_epoch")]
    pub epoch_minutes: i64,
    pub classes: Vec<GeneratorClass>,
    /// Chance that an episode is logged twice within a few minutes.
    #[serde(default = "default_duplicates")]
    pub duplicate_probability: f64,
    /// Chance that an admission reuses an earlier patient id.
    #[serde(default = "default_readmission")]
    pub readmission_probability: f64,
}

impl Default for GeneratorSpec {
    /// One stationary class (10 admissions/day) with the calibrated
    /// lognormal LoS.
    fn default() -> Self {
        let mut rates = ByInteraction::<f64>::default();
        rates[InteractionType::VitalSigns] = 4.0;
        rates[InteractionType::MedicationAdministration] = 3.0;
        rates[InteractionType::LabTestCollection] = 1.5;
        rates[InteractionType::Xray] = 0.3;
        rates[InteractionType::Ct] = 0.1;
        GeneratorSpec {
            horizon_days: default_horizon(),
            epoch_minutes: DEFAULT_EPOCH_MINUTES,
            classes: vec![GeneratorClass {
                arrivals: RateShape::Constant { rate: 10.0 },
                los: LosDistribution::calibrated_default(),
                daily_rates: rates,
                icu_probability: 0.05,
                icu_mean_days: default_icu_mean(),
            }],
            duplicate_probability: default_duplicates(),
            readmission_probability: default_readmission(),
        }
    }
}

fn rates(pairs: &[(InteractionType, f64)]) -> ByInteraction<f64> {
    let mut out = ByInteraction::<f64>::default();
    for &(j, v) in pairs {
        out[j] = v;
    }
    out
}

/// Three classes with well-separated LoS and interaction mixes, one
/// admission per day each.
pub fn three_class_spec() -> GeneratorSpec {
    use InteractionType::*;
    let class = |median: f64, r: ByInteraction<f64>| GeneratorClass {
        arrivals: RateShape::Constant { rate: 1.0 },
        los: LosDistribution::Lognormal {
            mu: crate::num::ln(median),
            sigma: 0.15,
        },
        daily_rates: r,
        icu_probability: 0.0,
        icu_mean_days: default_icu_mean(),
    };
    GeneratorSpec {
        classes: vec![
            class(2.0, rates(&[(VitalSigns, 12.0), (MedicationAdministration, 2.0), (LabTestCollection, 1.0)])),
            class(
                8.0,
                rates(&[(VitalSigns, 3.0), (MedicationAdministration, 10.0), (LabTestCollection, 4.0), (Xray, 0.5)]),
            ),
            class(
                16.0,
                rates(&[(VitalSigns, 6.0), (MedicationAdministration, 4.0), (LabTestCollection, 8.0), (Ct, 1.0), (Dialysis, 1.0)]),
            ),
        ],
        ..GeneratorSpec::default()
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon_days.is_finite() && self.horizon_days > 0.0) {
            return Err(SimError::InvalidHorizon(self.horizon_days));
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.duplicate_probability) || !prob(self.readmission_probability) {
            return Err(SimError::InvalidSpec("probabilities must lie in [0, 1]"));
        }
        for c in &self.classes {
            c.los.validate()?;
            if !prob(c.icu_probability) {
                return Err(SimError::InvalidSpec("icu_probability must lie in [0, 1]"));
            }
            if !(c.icu_mean_days.is_finite() && c.icu_mean_days > 0.0) {
                return Err(SimError::InvalidSpec("icu_mean_days must be positive"));
            }
            if c.daily_rates.iter().any(|(_, r)| !(r.is_finite() && *r >= 0.0)) {
                return Err(SimError::InvalidSpec("daily rates must be finite and non-negative"));
            }
            c.arrivals.to_rate(self.horizon_days)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    /// Sorted by admission time; ids are `A000001`, ... in that order.
    pub records: Vec<PatientRecord>,
    /// `(admission_id, true_class)` with 1-based classes in spec order.
    pub labels: Vec<(String, u32)>,
    /// True intensity per class.
    pub rates: Vec<PiecewiseRate>,
}

struct Draft {
    admit_minute: i64,
    class: u32,
    index: usize,
    record: PatientRecord,
}

/// Admissions over `[0, T)` from each class's arrival process. Every record
/// satisfies the admission invariants by construction.
pub fn generate_synthetic_dataset(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticDataset, SimError> {
    spec.validate()?;
    let mut drafts = Vec::new();
    let mut true_rates = Vec::with_capacity(spec.classes.len());
    for (ci, class) in spec.classes.iter().enumerate() {
        let class_id = ci as u32 + 1;
        let rate = class.arrivals.to_rate(spec.horizon_days)?;
        let class_seed = derive_seed(seed, class_id as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed);
        let times = simulate_nhpp_on(&rate, 0.0, spec.horizon_days, &mut rng);
        for (k, t) in times.into_iter().enumerate() {
            let mut prng = ChaCha8Rng::seed_from_u64(derive_seed(class_seed ^ 0xA11, k as u64));
            let admit_minute = spec.epoch_minutes + round(t * 1440.0) as i64;
            let record = draw_patient(spec, class, admit_minute, &mut prng);
            drafts.push(Draft {
                admit_minute,
                class: class_id,
                index: k,
                record,
            });
        }
        true_rates.push(rate);
    }
    drafts.sort_by_key(|d| (d.admit_minute, d.class, d.index));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut records = Vec::with_capacity(drafts.len());
    let mut labels = Vec::with_capacity(drafts.len());
    let mut patients = 0usize;
    for (n, mut d) in drafts.into_iter().enumerate() {
        let admission_id = format!("A{:06}", n + 1);
        let reuse = patients > 0 && rng.random::<f64>() < spec.readmission_probability;
        let pid = if reuse {
            rng.random_range(0..patients)
        } else {
            patients += 1;
            patients - 1
        };
        d.record.admission_id = admission_id.clone();
        d.record.patient_id = format!("P{:06}", pid + 1);
        labels.push((admission_id, d.class));
        records.push(d.record);
    }
    Ok(SyntheticDataset {
        records,
        labels,
        rates: true_rates,
    })
}

fn draw_patient<R: Rng + ?Sized>(spec: &GeneratorSpec, class: &GeneratorClass, admit: i64, rng: &mut R) -> PatientRecord {
    let los_days = class.los.sample(rng);
    let stay = (round(los_days * 1440.0) as i64).max(1);
    let icu = if rng.random::<f64>() < class.icu_probability {
        let days: f64 = Exp::new(1.0 / class.icu_mean_days).expect("validated").sample(rng);
        let minutes = (round(days * 1440.0) as i64).max(1);
        let offset = rng.random_range(0..=stay);
        Some((offset, minutes))
    } else {
        None
    };
    let icu_minutes = icu.map_or(0, |(_, m)| m);
    // effective minute -> wall minute, skipping the ICU block
    let wall = |e: i64| match icu {
        Some((offset, minutes)) if e >= offset => admit + e + minutes,
        _ => admit + e,
    };
    let discharge = admit + stay + icu_minutes;
    let los_eff = stay as f64 / 1440.0;

    let mut events = Vec::new();
    for j in InteractionType::ALL {
        let mean = class.daily_rates[j] * los_eff;
        if !(mean > 0.0) {
            continue;
        }
        let drawn: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
        let fit = stay / EPISODE_GAP_MINUTES + 1;
        let k = (drawn as i64).min(fit);
        if k == 0 {
            continue;
        }
        let free = stay - (k - 1) * EPISODE_GAP_MINUTES;
        let mut starts: Vec<i64> = (0..k).map(|_| rng.random_range(0..=free)).collect();
        starts.sort_unstable();
        for (i, s) in starts.into_iter().enumerate() {
            let at = wall(s + i as i64 * EPISODE_GAP_MINUTES);
            events.push(InteractionEvent { kind: j, at: Timestamp(at) });
            if rng.random::<f64>() < spec.duplicate_probability {
                let dup = at + rng.random_range(1..=MAX_DUPLICATE_OFFSET);
                if dup <= discharge {
                    events.push(InteractionEvent { kind: j, at: Timestamp(dup) });
                }
            }
        }
    }
    events.sort();
    let icu_intervals = match icu {
        Some((offset, minutes)) => vec![IcuInterval {
            start: Timestamp(admit + offset),
            end: Timestamp(admit + offset + minutes),
        }],
        None => Vec::new(),
    };
    PatientRecord {
        admission_id: String::new(),
        patient_id: String::new(),
        admit: Timestamp(admit),
        discharge: Timestamp(discharge),
        icu_intervals,
        events,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{check_record, effective_los};

    #[test]
    fn records_are_valid_and_deterministic() {
        let spec = GeneratorSpec::default();
        let a = generate_synthetic_dataset(&spec, 5).unwrap();
        let b = generate_synthetic_dataset(&spec, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.records.len() > 3000);
        for r in &a.records {
            assert!(check_record(r).is_empty(), "{r:?}");
            assert!(effective_los(r).unwrap() > 0.0);
        }
        assert!(a.records.windows(2).all(|w| w[0].admit <= w[1].admit));
        assert_eq!(a.labels.len(), a.records.len());
    }

    #[test]
    fn empty_spec() {
        let spec = GeneratorSpec {
            classes: vec![],
            ..GeneratorSpec::default()
        };
        let d = generate_synthetic_dataset(&spec, 1).unwrap();
        assert!(d.records.is_empty());
    }

    #[test]
    fn rate_shapes() {
        let s = RateShape::Sinusoidal {
            mean: 10.0,
            amplitude: 5.0,
            period_days: 7.0,
            pieces_per_period: 7,
        };
        let r = s.to_rate(364.0).unwrap();
        assert_eq!(r.rates().len(), 364);
        assert!((crate::nhpp::integrate_rate(&r, 0.0, 364.0) - 3640.0).abs() < 1e-6);
        assert!(RateShape::TwoPiece {
            first: 1.0,
            second: 2.0,
            split_day: 400.0
        }
        .to_rate(365.0)
        .is_err());
    }

    #[test]
    fn three_classes_are_labelled() {
        let d = generate_synthetic_dataset(&three_class_spec(), 3).unwrap();
        for c in 1..=3u32 {
            let n = d.labels.iter().filter(|(_, l)| *l == c).count();
            assert!(n > 300 && n < 430, "class {c}: {n}");
        }
    }
}
