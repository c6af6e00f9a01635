//! Shared domain types and scenario validation.
//!
//! Time is measured in days (real-valued) everywhere outside of raw
//! timestamps, which are whole minutes since the Unix epoch.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::marker::PhantomData;
use core::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::nhpp::PiecewiseRate;

pub const MINUTES_PER_DAY: f64 = 1440.0;

/// Work-days credited per listed staff member per calendar day when
/// computing `W(T)`. Two 12-hour shifts per head would be `2.0`.
pub const WORK_DAYS_PER_HEADCOUNT_DAY: f64 = 1.0;

macro_rules! closed_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $count:expr, {
            $( $variant:ident => $token:literal, $label:literal; )+
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $( #[serde(rename = $token)] $variant, )+
        }

        impl $name {
            pub const COUNT: usize = $count;
            pub const ALL: [$name; $count] = [ $( $name::$variant, )+ ];

            /// Stable zero-based index used for vector addressing.
            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }

            /// Machine token used in CSV and JSON.
            pub fn token(self) -> &'static str {
                match self { $( $name::$variant => $token, )+ }
            }

            /// Human-readable name.
            pub fn label(self) -> &'static str {
                match self { $( $name::$variant => $label, )+ }
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $( $token => Ok($name::$variant), )+
                    other => Err(UnknownToken(other.to_string())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown token `{0}`")]
pub struct UnknownToken(pub String);

closed_enum! {
    /// The fifteen clinical interaction categories.
    InteractionType, 15, {
        VitalSigns => "vital_signs", "Vital signs measurement";
        MedicationAdministration => "medication_administration", "Medication administration";
        LabTestCollection => "lab_test_collection", "Lab test collection";
        Xray => "xray", "X-ray";
        Ct => "ct", "CT";
        Mri => "mri", "MRI";
        Ultrasound => "ultrasound", "Ultrasound";
        NuclearMedicine => "nuclear_medicine", "Nuclear medicine";
        InterventionalRadiology => "interventional_radiology", "Interventional radiology";
        Tte => "tte", "Transthoracic echocardiography (TTE)";
        Tee => "tee", "Transesophageal echocardiography (TEE)";
        Bronchoscopy => "bronchoscopy", "Bronchoscopy";
        Dialysis => "dialysis", "Dialysis";
        SurgicalProcedure => "surgical_procedure", "Surgical procedure";
        RoomTransfer => "room_transfer", "Room transfer";
    }
}

closed_enum! {
    /// The seven PPE item types.
    PpeType, 7, {
        Gloves => "gloves", "Gloves";
        Gowns => "gowns", "Gowns";
        SurgicalMasks => "surgical_masks", "Surgical masks";
        N95Masks => "n95_masks", "N95 masks";
        FaceShields => "face_shields", "Face shields";
        Bouffants => "bouffants", "Bouffants";
        BootCovers => "boot_covers", "Boot covers";
    }
}

closed_enum! {
    /// Length-of-stay quantile labels, ordered by probability.
    QuantileLabel, 5, {
        Q0 => "q0", "0%";
        Q1 => "q1", "25%";
        Median => "median", "50%";
        Q3 => "q3", "75%";
        Q4 => "q4", "100%";
    }
}

impl QuantileLabel {
    pub fn probability(self) -> f64 {
        match self {
            QuantileLabel::Q0 => 0.0,
            QuantileLabel::Q1 => 0.25,
            QuantileLabel::Median => 0.5,
            QuantileLabel::Q3 => 0.75,
            QuantileLabel::Q4 => 1.0,
        }
    }

    /// The lower bound, central estimate and upper bound rows.
    pub const BOUNDS: [QuantileLabel; 3] = [QuantileLabel::Q1, QuantileLabel::Median, QuantileLabel::Q3];
}

macro_rules! keyed_vector {
    ($(#[$meta:meta])* $name:ident, $key:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name<T>(pub [T; $key::COUNT]);

        impl<T> $name<T> {
            pub fn from_fn(mut f: impl FnMut($key) -> T) -> Self {
                $name(core::array::from_fn(|i| f($key::ALL[i])))
            }

            pub fn get(&self, key: $key) -> &T {
                &self.0[key.index()]
            }

            pub fn get_mut(&mut self, key: $key) -> &mut T {
                &mut self.0[key.index()]
            }

            pub fn iter(&self) -> impl Iterator<Item = ($key, &T)> {
                $key::ALL.iter().copied().zip(self.0.iter())
            }

            pub fn map<U>(&self, mut f: impl FnMut($key, &T) -> U) -> $name<U> {
                $name::from_fn(|k| f(k, &self.0[k.index()]))
            }
        }

        impl<T: Default> Default for $name<T> {
            fn default() -> Self {
                $name::from_fn(|_| T::default())
            }
        }

        impl<T> core::ops::Index<$key> for $name<T> {
            type Output = T;
            fn index(&self, key: $key) -> &T {
                &self.0[key.index()]
            }
        }

        impl<T> core::ops::IndexMut<$key> for $name<T> {
            fn index_mut(&mut self, key: $key) -> &mut T {
                &mut self.0[key.index()]
            }
        }

        // Serialized as a JSON object keyed by token, in index order.
        impl<T: Serialize> Serialize for $name<T> {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some($key::COUNT))?;
                for (k, v) in self.iter() {
                    map.serialize_entry(k.token(), v)?;
                }
                map.end()
            }
        }

        // Missing keys take `T::default()`; unknown keys are rejected.
        impl<'de, T: Deserialize<'de> + Default> Deserialize<'de> for $name<T> {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                struct KeyedVisitor<T>(PhantomData<T>);

                impl<'de, T: Deserialize<'de> + Default> Visitor<'de> for KeyedVisitor<T> {
                    type Value = $name<T>;

                    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                        write!(f, "an object keyed by {} tokens", stringify!($key))
                    }

                    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                        let mut out = $name::<T>::default();
                        let mut seen = [false; $key::COUNT];
                        while let Some(token) = access.next_key::<String>()? {
                            let key = $key::from_str(&token).map_err(de::Error::custom)?;
                            if seen[key.index()] {
                                return Err(de::Error::custom(format!("duplicate key `{token}`")));
                            }
                            seen[key.index()] = true;
                            out.0[key.index()] = access.next_value()?;
                        }
                        Ok(out)
                    }
                }

                deserializer.deserialize_map(KeyedVisitor(PhantomData))
            }
        }
    };
}

keyed_vector!(
    /// A value per [`InteractionType`] (a J-vector).
    ByInteraction,
    InteractionType
);

keyed_vector!(
    /// A value per [`PpeType`] (an N-vector).
    ByPpe,
    PpeType
);

impl ByInteraction<f64> {
    pub fn dot(&self, other: &ByInteraction<f64>) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Whole minutes since 1970-01-01T00:00Z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_days(days: f64) -> Self {
        Timestamp(crate::num::round(days * MINUTES_PER_DAY) as i64)
    }

    pub fn as_days(self) -> f64 {
        self.0 as f64 / MINUTES_PER_DAY
    }

    pub fn minutes_since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Timestamp(self.0 + minutes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IcuInterval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl IcuInterval {
    pub fn minutes(&self) -> i64 {
        self.end.0 - self.start.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub kind: InteractionType,
    pub at: Timestamp,
}

/// One hospital admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub admission_id: String,
    pub patient_id: String,
    pub admit: Timestamp,
    pub discharge: Timestamp,
    #[serde(default)]
    pub icu_intervals: Vec<IcuInterval>,
    #[serde(default)]
    pub events: Vec<InteractionEvent>,
}

/// A patient class: LoS quantiles, the class's row of the daily interaction
/// matrix, and its yearly discharge count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientClassProfile {
    pub class_id: u32,
    /// LoS in days at each quantile label.
    pub los_quantiles: BTreeMap<QuantileLabel, f64>,
    /// Average interactions per day, by type.
    pub daily_rates: ByInteraction<f64>,
    /// Discharges during a typical year; estimates the arrival integral.
    pub annual_discharges: f64,
    #[serde(default)]
    pub member_count: u64,
    /// Admission intensity, when known (synthetic scenarios).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_rate: Option<PiecewiseRate>,
}

impl PatientClassProfile {
    pub fn sigma(&self, label: QuantileLabel) -> Option<f64> {
        self.los_quantiles.get(&label).copied()
    }
}

/// Per-interaction PPE usage for one PPE type. `default_row` applies to
/// every class without an entry in `class_rows`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageMatrix {
    pub default_row: ByInteraction<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub class_rows: BTreeMap<u32, ByInteraction<f64>>,
}

impl UsageMatrix {
    pub fn uniform(row: ByInteraction<f64>) -> Self {
        UsageMatrix {
            default_row: row,
            class_rows: BTreeMap::new(),
        }
    }

    pub fn row(&self, class_id: u32) -> &ByInteraction<f64> {
        self.class_rows.get(&class_id).unwrap_or(&self.default_row)
    }

    fn rows(&self) -> impl Iterator<Item = &ByInteraction<f64>> {
        core::iter::once(&self.default_row).chain(self.class_rows.values())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaffRole {
    pub role: String,
    /// Staff on duty per day.
    pub headcount: f64,
}

/// Reuse policy: a fraction `fraction` of items is reused over
/// `interactions` interactions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReuseParams {
    pub fraction: f64,
    pub interactions: u32,
}

impl Default for ReuseParams {
    fn default() -> Self {
        ReuseParams {
            fraction: 0.0,
            interactions: 1,
        }
    }
}

impl ReuseParams {
    /// `(1 - γ) + γ / r`.
    pub fn factor(&self) -> f64 {
        (1.0 - self.fraction) + self.fraction / self.interactions as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpeUsageConfig {
    pub usage: ByPpe<UsageMatrix>,
    /// Items used per staff work-day outside patient interactions.
    pub staff_daily_use: ByPpe<f64>,
    pub staffing: Vec<StaffRole>,
    #[serde(default)]
    pub reuse: ByPpe<ReuseParams>,
}

impl PpeUsageConfig {
    /// The shipped hospital configuration: per-interaction usage from the
    /// stakeholder interviews, two surgical masks per staff work-day, one face
    /// shield per staff week, and the general-medicine daily staffing list.
    pub fn hospital_default() -> Self {
        use InteractionType as I;
        use PpeType as P;
        // (gowns, gloves, surgical masks, n95, shields, bouffants, boot covers)
        let table: [(I, [f64; 7]); 15] = [
            (I::VitalSigns, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::MedicationAdministration, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::LabTestCollection, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::Xray, [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::Ct, [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::Mri, [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::Ultrasound, [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::NuclearMedicine, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::InterventionalRadiology, [3.5, 3.5, 0.0, 3.5, 0.0, 3.5, 3.5]),
            (I::Tte, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::Tee, [3.0, 3.0, 3.0, 3.0, 0.0, 3.0, 3.0]),
            (I::Bronchoscopy, [4.0, 4.0, 4.0, 4.0, 0.0, 4.0, 4.0]),
            (I::Dialysis, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            (I::SurgicalProcedure, [5.5, 5.5, 4.0, 2.0, 0.0, 5.5, 5.5]),
            (I::RoomTransfer, [0.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ];
        let column = |p: P| -> usize {
            match p {
                P::Gowns => 0,
                P::Gloves => 1,
                P::SurgicalMasks => 2,
                P::N95Masks => 3,
                P::FaceShields => 4,
                P::Bouffants => 5,
                P::BootCovers => 6,
            }
        };
        let usage = ByPpe::from_fn(|p| {
            UsageMatrix::uniform(ByInteraction::from_fn(|j| {
                let (kind, values) = table[j.index()];
                debug_assert_eq!(kind, j);
                values[column(p)]
            }))
        });
        let mut staff_daily_use = ByPpe::<f64>::default();
        staff_daily_use[P::SurgicalMasks] = 2.0;
        staff_daily_use[P::FaceShields] = 1.0 / 7.0;
        let staffing = [
            ("nurse", 50.0),
            ("phlebotomist", 4.0),
            ("porter", 10.0),
            ("doctor", 20.0),
            ("physiotherapist", 3.0),
            ("occupational_therapist", 3.0),
            ("dietitian", 2.0),
            ("language_pathologist", 2.0),
            ("discharge_planner", 3.0),
        ]
        .into_iter()
        .map(|(role, headcount)| StaffRole {
            role: role.to_string(),
            headcount,
        })
        .collect();
        PpeUsageConfig {
            usage,
            staff_daily_use,
            staffing,
            reuse: ByPpe::default(),
        }
    }

    pub fn daily_headcount(&self) -> f64 {
        self.staffing.iter().map(|s| s.headcount).sum()
    }

    /// `W(T)`: staff work-days over a horizon of `horizon_days`.
    pub fn work_days(&self, horizon_days: f64) -> f64 {
        self.daily_headcount() * WORK_DAYS_PER_HEADCOUNT_DAY * horizon_days
    }
}

/// How the arrival integral over `[0, T - σ]` is obtained for each class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalEstimator {
    /// The class's yearly discharge count (scaled by `arrival_scale`).
    #[default]
    DischargeCount,
    /// Integrate the class's `arrival_rate` over `[0, T - σ]`.
    RateIntegral,
}

fn default_horizon() -> f64 {
    365.0
}

fn default_scale() -> f64 {
    1.0
}

fn default_quantile() -> QuantileLabel {
    QuantileLabel::Median
}

/// Everything a forecast needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_horizon")]
    pub horizon_days: f64,
    #[serde(default = "default_quantile")]
    pub quantile_selection: QuantileLabel,
    pub classes: Vec<PatientClassProfile>,
    pub usage: PpeUsageConfig,
    #[serde(default = "default_scale")]
    pub arrival_scale: f64,
    #[serde(default)]
    pub arrival_estimator: ArrivalEstimator,
}

impl Scenario {
    pub fn new(classes: Vec<PatientClassProfile>, usage: PpeUsageConfig) -> Self {
        Scenario {
            horizon_days: default_horizon(),
            quantile_selection: default_quantile(),
            classes,
            usage,
            arrival_scale: default_scale(),
            arrival_estimator: ArrivalEstimator::default(),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding. Doubles as the
    /// content address of stored scenarios.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&bytes);
        let mut out = String::with_capacity(64);
        for byte in digest.iter() {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// One class's share of a PPE total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassComponent {
    pub class_id: u32,
    pub value: f64,
}

/// Demand for one PPE type at one LoS quantile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PpeDemand {
    pub staff_component: f64,
    pub class_components: Vec<ClassComponent>,
    /// `staff_component + Σ class_components`.
    pub total: f64,
    pub reuse_adjusted_total: f64,
    /// `reuse_adjusted_total` rounded up to whole items.
    pub procurement_units: u64,
}

impl PpeDemand {
    pub fn patient_component(&self) -> f64 {
        self.class_components.iter().map(|c| c.value).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub quantile: QuantileLabel,
    pub ppe: ByPpe<PpeDemand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub scenario_hash: String,
    pub cluster_count: usize,
    pub horizon_days: f64,
    pub work_days: f64,
    pub arrival_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// Demand per PPE type split into staff and per-class components, one row
/// per requested LoS quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<QuantileForecast>,
}

impl ForecastReport {
    pub fn row(&self, label: QuantileLabel) -> Option<&QuantileForecast> {
        self.rows.iter().find(|r| r.quantile == label)
    }
}

/// Machine-readable scenario validation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    #[serde(rename = "horizon_not_positive")]
    HorizonNotPositive,
    #[serde(rename = "arrival_scale_not_positive")]
    ArrivalScaleNotPositive,
    #[serde(rename = "no_classes")]
    NoClasses,
    #[serde(rename = "duplicate_class_id")]
    DuplicateClassId,
    #[serde(rename = "missing_quantile")]
    MissingQuantile,
    #[serde(rename = "invalid_los_quantile")]
    InvalidLosQuantile,
    #[serde(rename = "los_quantiles_not_monotone")]
    LosQuantilesNotMonotone,
    #[serde(rename = "sigma_not_positive")]
    SigmaNotPositive,
    #[serde(rename = "T_not_greater_than_sigma")]
    TNotGreaterThanSigma,
    #[serde(rename = "negative_daily_rate")]
    NegativeDailyRate,
    #[serde(rename = "negative_annual_discharges")]
    NegativeAnnualDischarges,
    #[serde(rename = "missing_arrival_rate")]
    MissingArrivalRate,
    #[serde(rename = "negative_usage")]
    NegativeUsage,
    #[serde(rename = "negative_staff_use")]
    NegativeStaffUse,
    #[serde(rename = "negative_headcount")]
    NegativeHeadcount,
    #[serde(rename = "reuse_fraction_out_of_range")]
    ReuseFractionOutOfRange,
    #[serde(rename = "reuse_interactions_below_one")]
    ReuseInteractionsBelowOne,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            HorizonNotPositive => "horizon_not_positive",
            ArrivalScaleNotPositive => "arrival_scale_not_positive",
            NoClasses => "no_classes",
            DuplicateClassId => "duplicate_class_id",
            MissingQuantile => "missing_quantile",
            InvalidLosQuantile => "invalid_los_quantile",
            LosQuantilesNotMonotone => "los_quantiles_not_monotone",
            SigmaNotPositive => "sigma_not_positive",
            TNotGreaterThanSigma => "T_not_greater_than_sigma",
            NegativeDailyRate => "negative_daily_rate",
            NegativeAnnualDischarges => "negative_annual_discharges",
            MissingArrivalRate => "missing_arrival_rate",
            NegativeUsage => "negative_usage",
            NegativeStaffUse => "negative_staff_use",
            NegativeHeadcount => "negative_headcount",
            ReuseFractionOutOfRange => "reuse_fraction_out_of_range",
            ReuseInteractionsBelowOne => "reuse_interactions_below_one",
        }
    }

    /// Codes that break the conditional-expectation preconditions
    /// (`σ_i > 0` and `T > σ_i`).
    pub fn is_los_precondition(self) -> bool {
        matches!(
            self,
            ViolationCode::SigmaNotPositive | ViolationCode::TNotGreaterThanSigma
        )
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// JSON-pointer-like location of the offending field.
    pub path: String,
    pub message: String,
}

fn non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Every invariant the scenario breaks, in a deterministic order. Uses the
/// scenario's own `quantile_selection` for `σ`.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    validate_scenario_at(s, s.quantile_selection)
}

/// As [`validate_scenario`], with `σ` taken at `label`.
pub fn validate_scenario_at(s: &Scenario, label: QuantileLabel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code: ViolationCode, path: String, message: String| {
        out.push(Violation { code, path, message })
    };

    let horizon_ok = s.horizon_days.is_finite() && s.horizon_days > 0.0;
    if !horizon_ok {
        push(
            ViolationCode::HorizonNotPositive,
            "/horizon_days".into(),
            format!("horizon must be a positive number of days, got {}", s.horizon_days),
        );
    }
    if !(s.arrival_scale.is_finite() && s.arrival_scale > 0.0) {
        push(
            ViolationCode::ArrivalScaleNotPositive,
            "/arrival_scale".into(),
            format!("arrival_scale must be positive, got {}", s.arrival_scale),
        );
    }
    if s.classes.is_empty() {
        push(
            ViolationCode::NoClasses,
            "/classes".into(),
            "scenario has no patient classes".into(),
        );
    }

    let mut seen_ids = BTreeMap::new();
    for (idx, class) in s.classes.iter().enumerate() {
        let base = format!("/classes/{idx}");
        if seen_ids.insert(class.class_id, idx).is_some() {
            push(
                ViolationCode::DuplicateClassId,
                format!("{base}/class_id"),
                format!("class id {} appears more than once", class.class_id),
            );
        }

        let mut prev: Option<(QuantileLabel, f64)> = None;
        for (&q, &v) in &class.los_quantiles {
            if !non_negative(v) {
                push(
                    ViolationCode::InvalidLosQuantile,
                    format!("{base}/los_quantiles/{q}"),
                    format!("LoS quantile {q} must be a finite non-negative number of days, got {v}"),
                );
            }
            if let Some((pq, pv)) = prev {
                if v < pv {
                    push(
                        ViolationCode::LosQuantilesNotMonotone,
                        format!("{base}/los_quantiles/{q}"),
                        format!("LoS quantile {q} ({v}) is below {pq} ({pv})"),
                    );
                }
            }
            prev = Some((q, v));
        }

        match class.sigma(label) {
            None => push(
                ViolationCode::MissingQuantile,
                format!("{base}/los_quantiles/{label}"),
                format!("class {} has no LoS quantile `{label}`", class.class_id),
            ),
            Some(sigma) => {
                if !(sigma > 0.0) {
                    push(
                        ViolationCode::SigmaNotPositive,
                        format!("{base}/los_quantiles/{label}"),
                        format!(
                            "class {}: LoS at {label} is {sigma}; the conditional estimate requires sigma > 0",
                            class.class_id
                        ),
                    );
                } else if horizon_ok && !(s.horizon_days > sigma) {
                    push(
                        ViolationCode::TNotGreaterThanSigma,
                        format!("{base}/los_quantiles/{label}"),
                        format!(
                            "class {}: horizon T = {} days is not greater than LoS sigma = {sigma} days at {label}; the conditional estimate requires T > sigma",
                            class.class_id, s.horizon_days
                        ),
                    );
                }
            }
        }

        for (j, &rate) in class.daily_rates.iter() {
            if !non_negative(rate) {
                push(
                    ViolationCode::NegativeDailyRate,
                    format!("{base}/daily_rates/{j}"),
                    format!("daily rate must be finite and >= 0, got {rate}"),
                );
            }
        }
        if !non_negative(class.annual_discharges) {
            push(
                ViolationCode::NegativeAnnualDischarges,
                format!("{base}/annual_discharges"),
                format!("annual discharges must be finite and >= 0, got {}", class.annual_discharges),
            );
        }
        if s.arrival_estimator == ArrivalEstimator::RateIntegral && class.arrival_rate.is_none() {
            push(
                ViolationCode::MissingArrivalRate,
                format!("{base}/arrival_rate"),
                format!("class {} has no arrival_rate but the estimator is rate_integral", class.class_id),
            );
        }
    }

    let usage = &s.usage;
    for (p, matrix) in usage.usage.iter() {
        for row in matrix.rows() {
            for (j, &u) in row.iter() {
                if !non_negative(u) {
                    push(
                        ViolationCode::NegativeUsage,
                        format!("/usage/usage/{p}/{j}"),
                        format!("usage of {p} per {j} must be finite and >= 0, got {u}"),
                    );
                }
            }
        }
    }
    for (p, &m) in usage.staff_daily_use.iter() {
        if !non_negative(m) {
            push(
                ViolationCode::NegativeStaffUse,
                format!("/usage/staff_daily_use/{p}"),
                format!("staff daily use of {p} must be finite and >= 0, got {m}"),
            );
        }
    }
    for (idx, role) in usage.staffing.iter().enumerate() {
        if !non_negative(role.headcount) {
            push(
                ViolationCode::NegativeHeadcount,
                format!("/usage/staffing/{idx}/headcount"),
                format!("headcount for {} must be finite and >= 0, got {}", role.role, role.headcount),
            );
        }
    }
    for (p, reuse) in usage.reuse.iter() {
        if !(reuse.fraction >= 0.0 && reuse.fraction <= 1.0) {
            push(
                ViolationCode::ReuseFractionOutOfRange,
                format!("/usage/reuse/{p}/fraction"),
                format!("reuse fraction for {p} must lie in [0, 1], got {}", reuse.fraction),
            );
        }
        if reuse.interactions < 1 {
            push(
                ViolationCode::ReuseInteractionsBelowOne,
                format!("/usage/reuse/{p}/interactions"),
                format!("reuse interactions for {p} must be >= 1, got {}", reuse.interactions),
            );
        }
    }
    out
}
