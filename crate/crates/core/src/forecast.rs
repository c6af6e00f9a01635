//! Closed-form conditional PPE demand.
//!
//! With each class's LoS pinned to `σ_i`, the expected demand for PPE type
//! `n` over a horizon `T` is
//!
//! ```text
//! E[Q_n] = Σ_i σ_i · A_i · Σ_j c_ij u^n_ij  +  m_n · W(T)
//! ```
//!
//! where `A_i` is the expected number of class-`i` discharges in `[0, T]`
//! (`∫_0^{T-σ_i} λ_i(u) du`, estimated by the yearly discharge count by
//! default) and `W(T)` the staff work-days.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_scenario_at, ArrivalEstimator, ByPpe, ClassComponent, ForecastReport, InteractionType, PatientClassProfile,
    PpeDemand, PpeType, PpeUsageConfig, QuantileForecast, QuantileLabel, ReportMetadata, ReuseParams, Scenario,
    Violation, ViolationCode,
};
use crate::nhpp::integrate_rate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("scenario is invalid ({} violation(s))", violations.len())]
    InvalidScenario { violations: Vec<Violation> },
    #[error("class {class_id} has no LoS quantile `{label}`")]
    MissingQuantile { class_id: u32, label: QuantileLabel },
    #[error("class {class_id}: LoS sigma must be positive, got {sigma}")]
    NonPositiveSigma { class_id: u32, sigma: f64 },
    #[error("class {class_id} has no arrival rate")]
    MissingArrivalRate { class_id: u32 },
    #[error("perturbation `{name}` produced an invalid scenario ({} violation(s))", violations.len())]
    InvalidPerturbation { name: String, violations: Vec<Violation> },
}

impl ForecastError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ForecastError::InvalidScenario { violations } | ForecastError::InvalidPerturbation { violations, .. } => {
                violations
            }
            _ => &[],
        }
    }
}

/// `Q^m_n = m_n · W(T)` for every PPE type.
pub fn staff_baseline(usage: &PpeUsageConfig, horizon_days: f64) -> ByPpe<f64> {
    let work_days = usage.work_days(horizon_days);
    usage.staff_daily_use.map(|_, &m| m * work_days)
}

/// `σ · A · Σ_j c_j u^n_j` per PPE type, for a given discharge expectation.
pub fn class_usage_for(profile: &PatientClassProfile, sigma: f64, discharges: f64, usage: &PpeUsageConfig) -> ByPpe<f64> {
    ByPpe::from_fn(|p| {
        let per_day = profile.daily_rates.dot(usage.usage[p].row(profile.class_id));
        sigma * discharges * per_day
    })
}

fn sigma_of(profile: &PatientClassProfile, label: QuantileLabel) -> Result<f64, ForecastError> {
    let sigma = profile.sigma(label).ok_or(ForecastError::MissingQuantile {
        class_id: profile.class_id,
        label,
    })?;
    if !(sigma > 0.0) {
        return Err(ForecastError::NonPositiveSigma {
            class_id: profile.class_id,
            sigma,
        });
    }
    Ok(sigma)
}

/// Expected class usage using the yearly discharge count as the arrival
/// integral, scaled by `arrival_scale`.
pub fn class_usage(
    profile: &PatientClassProfile,
    label: QuantileLabel,
    usage: &PpeUsageConfig,
    arrival_scale: f64,
) -> Result<ByPpe<f64>, ForecastError> {
    let sigma = sigma_of(profile, label)?;
    Ok(class_usage_for(profile, sigma, arrival_scale * profile.annual_discharges, usage))
}

/// Expected discharges of a class in `[0, T]` with LoS `sigma`, under the
/// scenario's estimator and arrival scale.
pub fn expected_discharges(s: &Scenario, profile: &PatientClassProfile, sigma: f64) -> Result<f64, ForecastError> {
    let base = match s.arrival_estimator {
        ArrivalEstimator::DischargeCount => profile.annual_discharges,
        ArrivalEstimator::RateIntegral => {
            let rate = profile.arrival_rate.as_ref().ok_or(ForecastError::MissingArrivalRate {
                class_id: profile.class_id,
            })?;
            integrate_rate(rate, 0.0, s.horizon_days - sigma)
        }
    };
    Ok(s.arrival_scale * base)
}

fn check(s: &Scenario, label: QuantileLabel) -> Result<(), ForecastError> {
    // An empty class list is a well-defined (staff-only) sum.
    let violations: Vec<Violation> = validate_scenario_at(s, label)
        .into_iter()
        .filter(|v| v.code != ViolationCode::NoClasses)
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ForecastError::InvalidScenario { violations })
    }
}

fn forecast_row(s: &Scenario, label: QuantileLabel) -> Result<QuantileForecast, ForecastError> {
    check(s, label)?;
    let staff = staff_baseline(&s.usage, s.horizon_days);
    let mut per_class: Vec<(u32, ByPpe<f64>)> = Vec::with_capacity(s.classes.len());
    for profile in &s.classes {
        let sigma = sigma_of(profile, label)?;
        let discharges = expected_discharges(s, profile, sigma)?;
        per_class.push((profile.class_id, class_usage_for(profile, sigma, discharges, &s.usage)));
    }
    let ppe = ByPpe::from_fn(|p| {
        let class_components: Vec<ClassComponent> = per_class
            .iter()
            .map(|(class_id, v)| ClassComponent {
                class_id: *class_id,
                value: v[p],
            })
            .collect();
        let total = staff[p] + class_components.iter().map(|c| c.value).sum::<f64>();
        PpeDemand {
            staff_component: staff[p],
            class_components,
            total,
            reuse_adjusted_total: total,
            procurement_units: procurement(total),
        }
    });
    Ok(QuantileForecast { quantile: label, ppe })
}

fn procurement(x: f64) -> u64 {
    crate::num::ceil(x.max(0.0)) as u64
}

fn metadata(s: &Scenario) -> ReportMetadata {
    ReportMetadata {
        scenario_hash: s.content_hash(),
        cluster_count: s.classes.len(),
        horizon_days: s.horizon_days,
        work_days: s.usage.work_days(s.horizon_days),
        arrival_scale: s.arrival_scale,
        timestamp: None,
    }
}

/// Conditional expected demand at the scenario's `quantile_selection`, with
/// the reuse adjustment applied.
pub fn expected_demand(s: &Scenario) -> Result<ForecastReport, ForecastError> {
    let row = forecast_row(s, s.quantile_selection)?;
    Ok(apply_reuse(
        &ForecastReport {
            metadata: metadata(s),
            rows: alloc::vec![row],
        },
        &s.usage,
    ))
}

/// Sets `reuse_adjusted_total = total · ((1 - γ) + γ / r)` per PPE type and
/// refreshes the procurement units. Other fields are untouched.
pub fn apply_reuse(report: &ForecastReport, usage: &PpeUsageConfig) -> ForecastReport {
    let mut out = report.clone();
    for row in &mut out.rows {
        for p in PpeType::ALL {
            let reuse: &ReuseParams = &usage.reuse[p];
            let demand = &mut row.ppe[p];
            demand.reuse_adjusted_total = demand.total * reuse.factor();
            demand.procurement_units = procurement(demand.reuse_adjusted_total);
        }
    }
    out
}

/// One forecast row per label, in the order given (normally Q1, median, Q3:
/// lower bound, central estimate, upper bound).
pub fn bounds_table(s: &Scenario, labels: &[QuantileLabel]) -> Result<ForecastReport, ForecastError> {
    let mut all_violations = Vec::new();
    for &label in labels {
        if let Err(ForecastError::InvalidScenario { violations }) = check(s, label) {
            for v in violations {
                if !all_violations.contains(&v) {
                    all_violations.push(v);
                }
            }
        }
    }
    if !all_violations.is_empty() {
        return Err(ForecastError::InvalidScenario {
            violations: all_violations,
        });
    }
    let rows = labels
        .iter()
        .map(|&label| forecast_row(s, label))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(apply_reuse(
        &ForecastReport {
            metadata: metadata(s),
            rows,
        },
        &s.usage,
    ))
}

/// A named what-if edit of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub name: String,
    pub change: ParameterChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterChange {
    /// Multiply `arrival_scale`.
    ArrivalScale { factor: f64 },
    /// Add to `m_n`.
    StaffDailyUse { ppe: PpeType, delta: f64 },
    /// Multiply every usage entry of every PPE type.
    UsageScale { factor: f64 },
    /// Add to one usage entry (all class rows).
    Usage {
        ppe: PpeType,
        interaction: InteractionType,
        delta: f64,
    },
    /// Multiply every class's daily interaction rates.
    DailyRateScale { factor: f64 },
    /// Add staff to the headcount (as a new role).
    Headcount { role: String, delta: f64 },
    HorizonDays { value: f64 },
    Reuse {
        ppe: PpeType,
        fraction: f64,
        interactions: u32,
    },
}

impl ParameterChange {
    pub fn apply(&self, s: &Scenario) -> Scenario {
        let mut out = s.clone();
        match self {
            ParameterChange::ArrivalScale { factor } => out.arrival_scale *= factor,
            ParameterChange::StaffDailyUse { ppe, delta } => out.usage.staff_daily_use[*ppe] += delta,
            ParameterChange::UsageScale { factor } => {
                for p in PpeType::ALL {
                    let m = &mut out.usage.usage[p];
                    for v in m.default_row.0.iter_mut() {
                        *v *= factor;
                    }
                    for row in m.class_rows.values_mut() {
                        for v in row.0.iter_mut() {
                            *v *= factor;
                        }
                    }
                }
            }
            ParameterChange::Usage { ppe, interaction, delta } => {
                let m = &mut out.usage.usage[*ppe];
                m.default_row[*interaction] += delta;
                for row in m.class_rows.values_mut() {
                    row[*interaction] += delta;
                }
            }
            ParameterChange::DailyRateScale { factor } => {
                for c in &mut out.classes {
                    for v in c.daily_rates.0.iter_mut() {
                        *v *= factor;
                    }
                }
            }
            ParameterChange::Headcount { role, delta } => out.usage.staffing.push(crate::model::StaffRole {
                role: role.clone(),
                headcount: *delta,
            }),
            ParameterChange::HorizonDays { value } => out.horizon_days = *value,
            ParameterChange::Reuse {
                ppe,
                fraction,
                interactions,
            } => {
                out.usage.reuse[*ppe] = ReuseParams {
                    fraction: *fraction,
                    interactions: *interactions,
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub baseline: f64,
    pub perturbed: f64,
    pub absolute: f64,
    /// `absolute / baseline`; `None` when the baseline is zero.
    pub relative: Option<f64>,
}

impl Delta {
    fn new(baseline: f64, perturbed: f64) -> Self {
        let absolute = perturbed - baseline;
        Delta {
            baseline,
            perturbed,
            absolute,
            relative: if baseline != 0.0 { Some(absolute / baseline) } else { None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub quantile: QuantileLabel,
    pub total: ByPpe<Delta>,
    pub staff_component: ByPpe<Delta>,
    pub patient_component: ByPpe<Delta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub name: String,
    pub change: ParameterChange,
    pub rows: Vec<SensitivityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub baseline: ForecastReport,
    pub perturbations: Vec<PerturbationResult>,
}

/// Re-evaluates [`bounds_table`] under each perturbation and reports the
/// change against the unperturbed scenario.
pub fn sensitivity(
    s: &Scenario,
    perturbations: &[Perturbation],
    labels: &[QuantileLabel],
) -> Result<SensitivityReport, ForecastError> {
    let baseline = bounds_table(s, labels)?;
    let mut results = Vec::with_capacity(perturbations.len());
    for p in perturbations {
        let perturbed_scenario = p.change.apply(s);
        let perturbed = bounds_table(&perturbed_scenario, labels).map_err(|e| match e {
            ForecastError::InvalidScenario { violations } => ForecastError::InvalidPerturbation {
                name: p.name.clone(),
                violations,
            },
            other => other,
        })?;
        let rows = baseline
            .rows
            .iter()
            .zip(&perturbed.rows)
            .map(|(b, q)| SensitivityRow {
                quantile: b.quantile,
                total: ByPpe::from_fn(|n| Delta::new(b.ppe[n].total, q.ppe[n].total)),
                staff_component: ByPpe::from_fn(|n| Delta::new(b.ppe[n].staff_component, q.ppe[n].staff_component)),
                patient_component: ByPpe::from_fn(|n| {
                    Delta::new(b.ppe[n].patient_component(), q.ppe[n].patient_component())
                }),
            })
            .collect();
        results.push(PerturbationResult {
            name: p.name.clone(),
            change: p.change.clone(),
            rows,
        });
    }
    Ok(SensitivityReport {
        baseline,
        perturbations: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ByInteraction, UsageMatrix};
    use crate::nhpp::PiecewiseRate;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn profile(class_id: u32, q: [f64; 3], discharges: f64) -> PatientClassProfile {
        let mut los = BTreeMap::new();
        los.insert(QuantileLabel::Q1, q[0]);
        los.insert(QuantileLabel::Median, q[1]);
        los.insert(QuantileLabel::Q3, q[2]);
        let mut rates = ByInteraction::<f64>::default();
        rates[InteractionType::VitalSigns] = 3.5;
        rates[InteractionType::MedicationAdministration] = 2.0;
        rates[InteractionType::SurgicalProcedure] = 0.05;
        rates[InteractionType::InterventionalRadiology] = 0.02;
        PatientClassProfile {
            class_id,
            los_quantiles: los,
            daily_rates: rates,
            annual_discharges: discharges,
            member_count: 100,
            arrival_rate: None,
        }
    }

    fn scenario() -> Scenario {
        Scenario::new(
            vec![profile(1, [1.0, 2.0, 3.0], 1200.0), profile(2, [5.0, 8.0, 14.0], 300.0)],
            PpeUsageConfig::hospital_default(),
        )
    }

    #[test]
    fn staff_baseline_masks() {
        let usage = PpeUsageConfig::hospital_default();
        let q = staff_baseline(&usage, 365.0);
        assert_eq!(q[PpeType::SurgicalMasks], 70_810.0);
        assert_eq!(q[PpeType::Gloves], 0.0);
        let double = staff_baseline(&usage, 730.0);
        for p in PpeType::ALL {
            assert_eq!(double[p], 2.0 * q[p]);
        }
    }

    #[test]
    fn class_usage_arithmetic() {
        let mut usage = PpeUsageConfig::hospital_default();
        let mut row = ByInteraction::<f64>::default();
        row[InteractionType::VitalSigns] = 1.0;
        usage.usage[PpeType::Gloves] = UsageMatrix::uniform(row);
        let mut p = profile(1, [2.0, 4.0, 6.0], 100.0);
        p.daily_rates = ByInteraction::default();
        p.daily_rates[InteractionType::VitalSigns] = 3.5;
        let q = class_usage(&p, QuantileLabel::Median, &usage, 1.0).unwrap();
        assert_eq!(q[PpeType::Gloves], 1400.0);
        assert_eq!(q[PpeType::FaceShields], 0.0);
        let doubled = class_usage(&p, QuantileLabel::Median, &usage, 2.0).unwrap();
        for n in PpeType::ALL {
            assert_eq!(doubled[n], 2.0 * q[n]);
        }
        assert!(matches!(
            class_usage(&p, QuantileLabel::Q4, &usage, 1.0),
            Err(ForecastError::MissingQuantile { .. })
        ));
        p.los_quantiles.insert(QuantileLabel::Q1, 0.0);
        assert!(matches!(
            class_usage(&p, QuantileLabel::Q1, &usage, 1.0),
            Err(ForecastError::NonPositiveSigma { .. })
        ));
    }

    #[test]
    fn single_class_closed_form() {
        // λ = 10/day, σ = 4, T = 365: ∫_0^{361} λ = 3,610 discharges
        let mut usage = PpeUsageConfig::hospital_default();
        usage.staff_daily_use = ByPpe::default();
        let mut p = profile(1, [4.0, 4.0, 4.0], 3610.0);
        p.daily_rates = ByInteraction::default();
        p.daily_rates[InteractionType::VitalSigns] = 2.0;
        let s = Scenario::new(vec![p.clone()], usage.clone());
        let r = expected_demand(&s).unwrap();
        assert_eq!(r.rows[0].ppe[PpeType::Gloves].total, 28_880.0);

        let mut s = Scenario::new(vec![p], usage);
        s.classes[0].arrival_rate = Some(PiecewiseRate::constant(10.0, 0.0, 365.0).unwrap());
        s.classes[0].annual_discharges = 0.0;
        s.arrival_estimator = ArrivalEstimator::RateIntegral;
        let r = expected_demand(&s).unwrap();
        assert_eq!(r.rows[0].ppe[PpeType::Gloves].total, 28_880.0);
    }

    #[test]
    fn no_classes_equals_staff_baseline() {
        let s = Scenario::new(vec![], PpeUsageConfig::hospital_default());
        let r = expected_demand(&s).unwrap();
        let staff = staff_baseline(&s.usage, 365.0);
        for p in PpeType::ALL {
            assert_eq!(r.rows[0].ppe[p].total, staff[p]);
            assert!(r.rows[0].ppe[p].class_components.is_empty());
        }
    }

    #[test]
    fn invalid_scenario_is_refused() {
        let mut s = scenario();
        s.horizon_days = 5.0;
        let err = expected_demand(&s).unwrap_err();
        assert_eq!(err.violations()[0].code, ViolationCode::TNotGreaterThanSigma);
        let err = bounds_table(&scenario_with_gamma(1.2), &QuantileLabel::BOUNDS).unwrap_err();
        assert_eq!(err.violations()[0].code, ViolationCode::ReuseFractionOutOfRange);
    }

    fn scenario_with_gamma(g: f64) -> Scenario {
        let mut s = scenario();
        s.usage.reuse[PpeType::Gowns].fraction = g;
        s
    }

    #[test]
    fn reuse_factors() {
        let s = scenario();
        let r = expected_demand(&s).unwrap();
        for p in PpeType::ALL {
            assert_eq!(r.rows[0].ppe[p].reuse_adjusted_total, r.rows[0].ppe[p].total);
        }
        let mut usage = s.usage.clone();
        usage.reuse[PpeType::Gloves] = ReuseParams { fraction: 1.0, interactions: 2 };
        usage.reuse[PpeType::Gowns] = ReuseParams { fraction: 0.5, interactions: 5 };
        let adj = apply_reuse(&r, &usage);
        let g = &adj.rows[0].ppe[PpeType::Gloves];
        assert_eq!(g.reuse_adjusted_total, g.total / 2.0);
        let w = &adj.rows[0].ppe[PpeType::Gowns];
        assert!((w.reuse_adjusted_total - 0.6 * w.total).abs() <= 1e-12 * w.total);
        assert_eq!(adj.rows[0].ppe[PpeType::Gloves].total, r.rows[0].ppe[PpeType::Gloves].total);
    }

    #[test]
    fn bounds_rows_are_ordered_and_monotone() {
        let r = bounds_table(&scenario(), &QuantileLabel::BOUNDS).unwrap();
        let labels: Vec<_> = r.rows.iter().map(|x| x.quantile).collect();
        assert_eq!(labels, QuantileLabel::BOUNDS.to_vec());
        for p in PpeType::ALL {
            assert!(r.rows[0].ppe[p].total <= r.rows[1].ppe[p].total);
            assert!(r.rows[1].ppe[p].total <= r.rows[2].ppe[p].total);
        }
        // gowns, bouffants and boot covers share a usage column
        for row in &r.rows {
            assert_eq!(row.ppe[PpeType::Gowns], row.ppe[PpeType::Bouffants]);
            assert_eq!(row.ppe[PpeType::Gowns], row.ppe[PpeType::BootCovers]);
            assert_eq!(row.ppe[PpeType::FaceShields].total, r.rows[0].ppe[PpeType::FaceShields].total);
        }
    }

    #[test]
    fn sensitivity_deltas() {
        let s = scenario();
        let perturbations = vec![
            Perturbation {
                name: "double arrivals".into(),
                change: ParameterChange::ArrivalScale { factor: 2.0 },
            },
            Perturbation {
                name: "one more mask".into(),
                change: ParameterChange::StaffDailyUse {
                    ppe: PpeType::SurgicalMasks,
                    delta: 1.0,
                },
            },
            Perturbation {
                name: "no interaction usage".into(),
                change: ParameterChange::UsageScale { factor: 0.0 },
            },
        ];
        let rep = sensitivity(&s, &perturbations, &QuantileLabel::BOUNDS).unwrap();
        let w = s.usage.work_days(s.horizon_days);
        for row in &rep.perturbations[0].rows {
            for p in PpeType::ALL {
                assert_eq!(row.staff_component[p].absolute, 0.0);
                assert_eq!(row.patient_component[p].perturbed, 2.0 * row.patient_component[p].baseline);
            }
        }
        for row in &rep.perturbations[1].rows {
            assert_eq!(row.total[PpeType::SurgicalMasks].absolute, w);
            assert_eq!(row.total[PpeType::Gloves].absolute, 0.0);
        }
        let staff = staff_baseline(&s.usage, s.horizon_days);
        for row in &rep.perturbations[2].rows {
            for p in PpeType::ALL {
                assert_eq!(row.total[p].perturbed, staff[p]);
            }
        }
        let bad = vec![Perturbation {
            name: "bad".into(),
            change: ParameterChange::Reuse {
                ppe: PpeType::Gloves,
                fraction: 2.0,
                interactions: 1,
            },
        }];
        assert!(matches!(
            sensitivity(&s, &bad, &QuantileLabel::BOUNDS),
            Err(ForecastError::InvalidPerturbation { .. })
        ));
    }

    #[test]
    fn class_specific_rows_apply() {
        let mut s = scenario();
        let mut row = ByInteraction::<f64>::default();
        row[InteractionType::VitalSigns] = 1.0;
        s.usage.usage[PpeType::FaceShields].class_rows.insert(2, row);
        let r = expected_demand(&s).unwrap();
        let shields = &r.rows[0].ppe[PpeType::FaceShields];
        assert_eq!(shields.class_components[0].value, 0.0);
        assert_eq!(shields.class_components[1].value, 8.0 * 300.0 * 3.5);
    }
}
