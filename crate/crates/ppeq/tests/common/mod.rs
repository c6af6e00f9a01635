//! Fixture scenarios and helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ppeq_core::model::{
    ArrivalEstimator, ByInteraction, InteractionType, PatientClassProfile, PpeType, PpeUsageConfig, QuantileLabel,
    ReuseParams, Scenario,
};
use ppeq_core::nhpp::PiecewiseRate;

pub fn quantiles(q: [f64; 5]) -> BTreeMap<QuantileLabel, f64> {
    QuantileLabel::ALL.iter().copied().zip(q).collect()
}

pub fn rates(pairs: &[(InteractionType, f64)]) -> ByInteraction<f64> {
    let mut out = ByInteraction::<f64>::default();
    for &(j, v) in pairs {
        out[j] = v;
    }
    out
}

pub fn profile(class_id: u32, q: [f64; 5], r: ByInteraction<f64>, annual: f64) -> PatientClassProfile {
    PatientClassProfile {
        class_id,
        los_quantiles: quantiles(q),
        daily_rates: r,
        annual_discharges: annual,
        member_count: 100,
        arrival_rate: None,
    }
}

pub fn with_rate(mut p: PatientClassProfile, rate: PiecewiseRate) -> PatientClassProfile {
    p.arrival_rate = Some(rate);
    p
}

pub fn two_piece(first: f64, second: f64, split: f64, end: f64) -> PiecewiseRate {
    PiecewiseRate::new(vec![0.0, split, end], vec![first, second]).unwrap()
}

/// `mean + amp·sin(2πt/period)` on hourly pieces.
pub fn sinusoid(mean: f64, amp: f64, period: f64, start: f64, end: f64) -> PiecewiseRate {
    let pieces = ((end - start) * 24.0).round() as usize;
    PiecewiseRate::sampled(start, end, pieces, |t| mean + amp * (2.0 * PI * t / period).sin()).unwrap()
}

use InteractionType as I;

/// A mix touching every PPE column of the default usage table.
pub fn broad_rates(scale: f64) -> ByInteraction<f64> {
    rates(&[
        (I::VitalSigns, 6.0 * scale),
        (I::MedicationAdministration, 4.0 * scale),
        (I::LabTestCollection, 1.5 * scale),
        (I::Xray, 0.4 * scale),
        (I::InterventionalRadiology, 0.05 * scale),
        (I::Tee, 0.03 * scale),
        (I::Bronchoscopy, 0.02 * scale),
        (I::SurgicalProcedure, 0.04 * scale),
        (I::RoomTransfer, 0.2 * scale),
    ])
}

/// Oracle fixtures: 1 to 8 classes, constant, two-piece and sinusoidal
/// intensities, and each of the three bound quantiles.
pub fn oracle_scenarios() -> Vec<(&'static str, Scenario)> {
    let usage = PpeUsageConfig::hospital_default();
    let mut out = Vec::new();

    // 1 class, discharge-count arrivals, median
    let s = Scenario::new(vec![profile(1, [1.0, 2.5, 4.8, 9.5, 40.0], broad_rates(1.0), 1500.0)], usage.clone());
    out.push(("one_class_constant_median", s));

    // 3 classes, two-piece intensities, Q1
    let mut s = Scenario::new(
        vec![
            with_rate(profile(1, [0.5, 1.0, 2.0, 3.0, 6.0], broad_rates(1.2), 0.0), two_piece(2.0, 5.0, 120.0, 365.0)),
            with_rate(profile(2, [2.0, 6.0, 8.0, 11.0, 30.0], broad_rates(0.7), 0.0), two_piece(4.0, 1.0, 200.0, 365.0)),
            with_rate(profile(3, [5.0, 14.0, 16.0, 20.0, 60.0], broad_rates(0.4), 0.0), two_piece(0.5, 1.5, 50.0, 365.0)),
        ],
        usage.clone(),
    );
    s.arrival_estimator = ArrivalEstimator::RateIntegral;
    s.quantile_selection = QuantileLabel::Q1;
    out.push(("three_class_two_piece_q1", s));

    // 5 classes, sinusoidal intensities, Q3
    let classes = (1..=5)
        .map(|c| {
            let cf = c as f64;
            with_rate(
                profile(c, [0.5 * cf, 1.5 * cf, 2.0 * cf, 3.0 * cf, 9.0 * cf], broad_rates(1.0 / cf), 0.0),
                sinusoid(2.0 + cf, 1.5, 30.0 + 20.0 * cf, 0.0, 365.0),
            )
        })
        .collect();
    let mut s = Scenario::new(classes, usage.clone());
    s.arrival_estimator = ArrivalEstimator::RateIntegral;
    s.quantile_selection = QuantileLabel::Q3;
    out.push(("five_class_sinusoid_q3", s));

    // 8 classes, mixed shapes, class-specific usage rows, 180-day horizon
    let classes: Vec<_> = (1..=8)
        .map(|c| {
            let cf = c as f64;
            let p = profile(c, [0.3 * cf, 0.8 * cf, 1.2 * cf, 2.0 * cf, 5.0 * cf], broad_rates(0.5 + 0.1 * cf), 0.0);
            let rate = match c % 3 {
                0 => PiecewiseRate::constant(1.0 + 0.2 * cf, 0.0, 180.0).unwrap(),
                1 => two_piece(3.0, 0.5 + 0.1 * cf, 60.0 + cf, 180.0),
                _ => sinusoid(2.0, 1.0, 7.0, 0.0, 180.0),
            };
            with_rate(p, rate)
        })
        .collect();
    let mut s = Scenario::new(classes, usage.clone());
    s.horizon_days = 180.0;
    s.arrival_estimator = ArrivalEstimator::RateIntegral;
    let row = s.usage.usage[PpeType::Gowns].default_row.map(|_, v| v * 2.0 + 0.1);
    s.usage.usage[PpeType::Gowns].class_rows.insert(4, row);
    out.push(("eight_class_mixed_median", s));

    // 2 classes, discharge counts, scaled arrivals and reuse, Q3
    let mut s = Scenario::new(
        vec![
            profile(1, [1.0, 3.0, 5.0, 9.0, 25.0], broad_rates(0.8), 900.0),
            profile(2, [2.0, 7.0, 12.0, 21.0, 80.0], broad_rates(1.5), 250.0),
        ],
        usage,
    );
    s.arrival_scale = 1.3;
    s.quantile_selection = QuantileLabel::Q3;
    s.usage.reuse[PpeType::N95Masks] = ReuseParams {
        fraction: 0.5,
        interactions: 3,
    };
    out.push(("two_class_scaled_q3", s));
    out
}

/// A small valid scenario for service tests.
pub fn small_scenario() -> Scenario {
    Scenario::new(
        vec![
            profile(1, [1.0, 2.0, 3.0, 5.0, 12.0], broad_rates(1.0), 800.0),
            profile(2, [3.0, 6.0, 9.0, 14.0, 40.0], broad_rates(0.5), 300.0),
        ],
        PpeUsageConfig::hospital_default(),
    )
}
