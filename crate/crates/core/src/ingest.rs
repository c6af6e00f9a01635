//! Record checks, interaction deduplication, effective length-of-stay and
//! the 16-dimensional clustering features.
//!
//! CSV parsing lives in the `ppeq` crate; everything here is pure.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ByInteraction, IcuInterval, InteractionEvent, InteractionType, PatientRecord, Timestamp, MINUTES_PER_DAY};

/// Same-type timestamps closer than this are one interaction.
pub const DEFAULT_DEDUP_WINDOW_HOURS: f64 = 1.0;

/// Length of a feature vector: LoS plus one rate per interaction type.
pub const FEATURE_DIM: usize = 1 + InteractionType::COUNT;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("deduplication window must be a finite non-negative number of hours, got {0}")]
    InvalidWindow(f64),
    #[error("admission {admission_id}: effective length-of-stay is {effective_days} days (ICU covers the whole stay)")]
    ZeroEffectiveLos { admission_id: String, effective_days: f64 },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::InvalidWindow(_) => "invalid_window",
            IngestError::ZeroEffectiveLos { .. } => "zero_effective_los",
        }
    }
}

/// A broken [`PatientRecord`] invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "invariant", rename_all = "snake_case")]
pub enum RecordViolation {
    /// `admit_time < discharge_time` does not hold.
    AdmitNotBeforeDischarge,
    /// ICU interval with `end < start`.
    IcuIntervalReversed { index: usize },
    /// ICU interval not contained in the stay.
    IcuOutsideStay { index: usize },
    /// Interaction timestamp outside `[admit, discharge]`.
    EventOutsideStay { index: usize, kind: InteractionType, at: Timestamp },
}

impl RecordViolation {
    pub fn code(&self) -> &'static str {
        match self {
            RecordViolation::AdmitNotBeforeDischarge => "admit_not_before_discharge",
            RecordViolation::IcuIntervalReversed { .. } => "icu_interval_reversed",
            RecordViolation::IcuOutsideStay { .. } => "icu_outside_stay",
            RecordViolation::EventOutsideStay { .. } => "event_outside_stay",
        }
    }
}

/// All invariant violations of `r`; empty when the record is valid.
pub fn check_record(r: &PatientRecord) -> Vec<RecordViolation> {
    let mut out = Vec::new();
    if r.admit >= r.discharge {
        out.push(RecordViolation::AdmitNotBeforeDischarge);
    }
    for (index, icu) in r.icu_intervals.iter().enumerate() {
        if icu.end < icu.start {
            out.push(RecordViolation::IcuIntervalReversed { index });
        } else if icu.start < r.admit || icu.end > r.discharge {
            out.push(RecordViolation::IcuOutsideStay { index });
        }
    }
    for (index, e) in r.events.iter().enumerate() {
        if e.at < r.admit || e.at > r.discharge {
            out.push(RecordViolation::EventOutsideStay {
                index,
                kind: e.kind,
                at: e.at,
            });
        }
    }
    out
}

/// Sorts and merges overlapping or touching ICU intervals.
pub fn normalize_icu(intervals: &[IcuInterval]) -> Vec<IcuInterval> {
    let mut sorted: Vec<IcuInterval> = intervals.to_vec();
    sorted.sort();
    let mut merged: Vec<IcuInterval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match merged.last_mut() {
            Some(last) if iv.start <= last.end => {
                if iv.end > last.end {
                    last.end = iv.end;
                }
            }
            _ => merged.push(iv),
        }
    }
    merged
}

/// Collapses repeated timestamps of the same interaction type.
///
/// Per type, the earliest event opens a window `[t, t + window)`; every
/// same-type event inside it is dropped, and the first event at or past the
/// window's end opens the next one. The anchors are returned sorted by
/// `(timestamp, type)`. A zero window keeps every event.
pub fn deduplicate_events(events: &[InteractionEvent], window_hours: f64) -> Result<Vec<InteractionEvent>, IngestError> {
    if !(window_hours.is_finite() && window_hours >= 0.0) {
        return Err(IngestError::InvalidWindow(window_hours));
    }
    let window_minutes = window_hours * 60.0;
    let mut sorted = events.to_vec();
    sorted.sort_by_key(|e| (e.kind, e.at));

    let mut out = Vec::with_capacity(sorted.len());
    let mut anchor: Option<InteractionEvent> = None;
    for e in sorted {
        let opens = match anchor {
            Some(a) if a.kind == e.kind => (e.at.minutes_since(a.at) as f64) >= window_minutes,
            _ => true,
        };
        if opens {
            anchor = Some(e);
            out.push(e);
        }
    }
    out.sort_by_key(|e| (e.at, e.kind));
    Ok(out)
}

/// Stay length minus time spent in ICU, in days. ICU intervals are merged
/// first so double-logged transfers are subtracted once.
pub fn effective_los(r: &PatientRecord) -> Result<f64, IngestError> {
    let stay = r.discharge.minutes_since(r.admit);
    let icu: i64 = normalize_icu(&r.icu_intervals)
        .iter()
        .map(|iv| {
            let start = iv.start.max(r.admit);
            let end = iv.end.min(r.discharge);
            (end.0 - start.0).max(0)
        })
        .sum();
    let minutes = stay - icu;
    let days = minutes as f64 / MINUTES_PER_DAY;
    if minutes <= 0 {
        return Err(IngestError::ZeroEffectiveLos {
            admission_id: r.admission_id.clone(),
            effective_days: days,
        });
    }
    Ok(days)
}

/// Effective LoS and average daily count of each interaction type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub los_days: f64,
    pub daily_rates: ByInteraction<f64>,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        out[0] = self.los_days;
        out[1..].copy_from_slice(&self.daily_rates.0);
        out
    }
}

/// Features of a record whose events are already deduplicated.
pub fn feature_vector(r: &PatientRecord) -> Result<FeatureVector, IngestError> {
    let los_days = effective_los(r)?;
    let mut counts = [0u64; InteractionType::COUNT];
    for e in &r.events {
        counts[e.kind.index()] += 1;
    }
    Ok(FeatureVector {
        los_days,
        daily_rates: ByInteraction::from_fn(|j| counts[j.index()] as f64 / los_days),
    })
}

/// A record that made it through deduplication and feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedPatient {
    pub admission_id: String,
    pub admit: Timestamp,
    pub discharge: Timestamp,
    pub features: FeatureVector,
    pub event_counts: ByInteraction<u64>,
}

/// A record left out of clustering, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub admission_id: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreparedSet {
    pub patients: Vec<PreparedPatient>,
    pub excluded: Vec<Exclusion>,
}

/// Deduplicates every record's events and builds its features. Records with
/// no positive effective LoS are excluded with a diagnostic.
pub fn prepare_records(records: &[PatientRecord], window_hours: f64) -> Result<PreparedSet, IngestError> {
    if !(window_hours.is_finite() && window_hours >= 0.0) {
        return Err(IngestError::InvalidWindow(window_hours));
    }
    let mut set = PreparedSet::default();
    for r in records {
        let events = deduplicate_events(&r.events, window_hours)?;
        let mut event_counts = ByInteraction::<u64>::default();
        for e in &events {
            event_counts[e.kind] += 1;
        }
        let deduped = PatientRecord {
            events,
            ..r.clone()
        };
        match feature_vector(&deduped) {
            Ok(features) => set.patients.push(PreparedPatient {
                admission_id: r.admission_id.clone(),
                admit: r.admit,
                discharge: r.discharge,
                features,
                event_counts,
            }),
            Err(e) => set.excluded.push(Exclusion {
                admission_id: r.admission_id.clone(),
                code: e.code().into(),
                message: alloc::format!("{e}"),
            }),
        }
    }
    Ok(set)
}
