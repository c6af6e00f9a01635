//! Pipeline steps shared by the CLI and the HTTP service.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use ppeq_core::clustering::{
    build_class_profiles, elbow_scan, standardize, ClusteringResult, ElbowPoint, Matrix, ProfileWarning,
    Standardization, DEFAULT_STARTS,
};
use ppeq_core::forecast::{bounds_table, expected_demand};
use ppeq_core::ingest::{prepare_records, Exclusion, DEFAULT_DEDUP_WINDOW_HOURS};
use ppeq_core::model::{
    validate_scenario, ForecastReport, PatientClassProfile, PatientRecord, PpeUsageConfig, QuantileLabel, Scenario,
    Timestamp, MINUTES_PER_DAY,
};
use ppeq_core::nhpp::{stationarity_sweep, SweepConfig, SweepOutcome};
use ppeq_core::sim::{compare_to_forecast, OracleComparison, PpePlan, SimulationConfig, SimulationSummary};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// Largest replication count a single simulation may request.
pub const MAX_REPLICATIONS: usize = 10_000;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let bytes = std::fs::read(path).map_err(|e| AppError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| AppError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn floor_day(t: Timestamp) -> Timestamp {
    Timestamp(t.0.div_euclid(1440) * 1440)
}

/// Whole days from the first admission's midnight to the midnight after the
/// last admission.
pub fn arrival_horizon(records: &[PatientRecord]) -> Option<(Timestamp, Timestamp)> {
    let first = records.iter().map(|r| r.admit).min()?;
    let last = records.iter().map(|r| r.admit).max()?;
    Some((floor_day(first), floor_day(last).plus_minutes(1440)))
}

fn days_between(a: Timestamp, b: Timestamp) -> f64 {
    b.minutes_since(a) as f64 / MINUTES_PER_DAY
}

/// Stationarity sweep over admissions falling in `window` (default: the
/// arrival horizon). Times are in days from the window start.
pub fn nhpp_sweep(
    records: &[PatientRecord],
    interval_counts: &[usize],
    window: Option<(Timestamp, Timestamp)>,
    config: SweepConfig,
) -> Result<SweepOutcome, AppError> {
    let (start, end) = window
        .or_else(|| arrival_horizon(records))
        .ok_or_else(|| AppError::InvalidArgument("dataset has no admissions".into()))?;
    if end <= start {
        return Err(AppError::InvalidArgument("window end must follow its start".into()));
    }
    let mut arrivals: Vec<f64> = records
        .iter()
        .filter(|r| r.admit >= start && r.admit <= end)
        .map(|r| days_between(start, r.admit))
        .collect();
    arrivals.sort_by(f64::total_cmp);
    Ok(stationarity_sweep(&arrivals, (0.0, days_between(start, end)), interval_counts, config)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    pub ks: Vec<usize>,
    /// Overrides the elbow suggestion.
    pub k: Option<usize>,
    pub seed: u64,
    pub starts: usize,
    pub window_hours: f64,
    /// Discharge-count window; defaults to the arrival horizon.
    pub reference: Option<(Timestamp, Timestamp)>,
    /// Also build profiles for every scanned `k`.
    pub all_k: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            ks: (1..=10).collect(),
            k: None,
            seed: 0,
            starts: DEFAULT_STARTS,
            window_hours: DEFAULT_DEDUP_WINDOW_HOURS,
            reference: None,
            all_k: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutput {
    pub curve: Vec<ElbowPoint>,
    pub suggested_k: usize,
    /// The `k` the profiles were built for.
    pub k: usize,
    pub result: ClusteringResult,
    pub admission_ids: Vec<String>,
    pub profiles: Vec<PatientClassProfile>,
    pub warnings: Vec<ProfileWarning>,
    pub excluded: Vec<Exclusion>,
    pub standardization: Standardization,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles_by_k: Vec<ProfilesAtK>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilesAtK {
    pub k: usize,
    pub profiles: Vec<PatientClassProfile>,
    pub warnings: Vec<ProfileWarning>,
}

impl ClusterOutput {
    /// Profiles built for `k`, if that `k` was kept.
    pub fn profiles_for(&self, k: usize) -> Option<&[PatientClassProfile]> {
        if k == self.k {
            return Some(&self.profiles);
        }
        self.profiles_by_k.iter().find(|p| p.k == k).map(|p| p.profiles.as_slice())
    }
}

/// Deduplicates, standardizes, runs the elbow scan and builds profiles at
/// the chosen `k` (at every scanned `k` with `all_k`).
pub fn cluster(records: &[PatientRecord], params: &ClusterParams) -> Result<ClusterOutput, AppError> {
    let prepared = prepare_records(records, params.window_hours)
        .map_err(|e| AppError::InvalidArgument(e.to_string()))?;
    let features: Vec<_> = prepared.patients.iter().map(|p| p.features).collect();
    if features.is_empty() {
        return Err(AppError::InvalidArgument("no records left to cluster".into()));
    }
    let (z, standardization) = standardize(&Matrix::from_features(&features))?;
    let mut ks = params.ks.clone();
    if let Some(k) = params.k {
        if !ks.contains(&k) {
            ks.push(k);
            ks.sort_unstable();
        }
    }
    let scan = elbow_scan(&z, &ks, params.starts, params.seed)?;
    let reference = params
        .reference
        .or_else(|| arrival_horizon(records))
        .ok_or_else(|| AppError::InvalidArgument("dataset has no admissions".into()))?;
    let k = params.k.unwrap_or(scan.suggested_k);
    let result = scan.result_for(k).expect("chosen k is scanned").clone();
    let chosen = build_class_profiles(&prepared.patients, &result.assignments, reference)?;
    let mut profiles_by_k = Vec::new();
    if params.all_k {
        for r in &scan.results {
            let set = build_class_profiles(&prepared.patients, &r.assignments, reference)?;
            profiles_by_k.push(ProfilesAtK {
                k: r.k,
                profiles: set.profiles,
                warnings: set.warnings,
            });
        }
    }
    Ok(ClusterOutput {
        curve: scan.curve,
        suggested_k: scan.suggested_k,
        k,
        result,
        admission_ids: prepared.patients.iter().map(|p| p.admission_id.clone()).collect(),
        profiles: chosen.profiles,
        warnings: chosen.warnings,
        excluded: prepared.excluded,
        standardization,
        profiles_by_k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastParams {
    pub usage: PpeUsageConfig,
    pub horizon_days: f64,
    pub labels: Vec<QuantileLabel>,
    pub arrival_scale: f64,
}

impl Default for ForecastParams {
    fn default() -> Self {
        ForecastParams {
            usage: PpeUsageConfig::hospital_default(),
            horizon_days: 365.0,
            labels: QuantileLabel::BOUNDS.to_vec(),
            arrival_scale: 1.0,
        }
    }
}

impl ForecastParams {
    pub fn scenario(&self, profiles: Vec<PatientClassProfile>) -> Scenario {
        let mut s = Scenario::new(profiles, self.usage.clone());
        s.horizon_days = self.horizon_days;
        s.arrival_scale = self.arrival_scale;
        s
    }
}

/// Validates the scenario, then evaluates the bound rows.
pub fn forecast(s: &Scenario, labels: &[QuantileLabel]) -> Result<ForecastReport, AppError> {
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(AppError::invalid(violations));
    }
    Ok(bounds_table(s, labels)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub scenario: Scenario,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: SimulationConfig,
    /// Keep every replication's outcome in the response.
    #[serde(default)]
    pub include_replications: bool,
}

fn default_reps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub comparison: OracleComparison,
    pub summary: SimulationSummary,
}

/// Monte Carlo run compared against the closed form at the scenario's
/// quantile. Replications run on the current rayon pool; `cancel` stops
/// outstanding work.
pub fn simulate(req: &SimulateRequest, cancel: &AtomicBool) -> Result<SimulateResponse, AppError> {
    if req.reps == 0 {
        return Err(AppError::InvalidArgument("reps must be at least 1".into()));
    }
    if req.reps > MAX_REPLICATIONS {
        return Err(AppError::Budget(format!(
            "{} replications requested; the limit is {MAX_REPLICATIONS}",
            req.reps
        )));
    }
    let violations = validate_scenario(&req.scenario);
    if !violations.is_empty() {
        return Err(AppError::invalid(violations));
    }
    let plan = PpePlan::new(&req.scenario, &req.config)?;
    let outcomes = (0..req.reps)
        .into_par_iter()
        .map(|r| {
            if cancel.load(Ordering::Relaxed) {
                None
            } else {
                Some(ppeq_core::sim::ppe_replication(&plan, req.seed, r))
            }
        })
        .collect::<Option<Vec<_>>>()
        .ok_or(AppError::Cancelled)?;
    let mut summary = SimulationSummary::from_outcomes(req.seed, outcomes);
    let closed = expected_demand(&req.scenario)?;
    let comparison = compare_to_forecast(&summary, &closed.rows[0]);
    if !req.include_replications {
        summary.per_replication.clear();
    }
    Ok(SimulateResponse { comparison, summary })
}
