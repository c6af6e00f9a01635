//! Patient classes: z-score standardization, seeded k-means with restarts,
//! an elbow scan over `k`, and per-class profiles (LoS quantiles, mean daily
//! interaction rates, yearly discharges).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{FeatureVector, PreparedPatient};
use crate::model::{ByInteraction, PatientClassProfile, QuantileLabel, Timestamp};
use crate::num::{derive_seed, quantile_sorted, sqrt};

pub const DEFAULT_STARTS: usize = 25;
pub const MAX_ITERATIONS: usize = 300;
/// Classes smaller than this get a `los_estimate_unreliable` warning.
pub const MIN_RELIABLE_MEMBERS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("matrix contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("k must satisfy 1 <= k <= rows ({rows}), got {k}")]
    InvalidK { k: usize, rows: usize },
    #[error("n_starts must be at least 1")]
    NoStarts,
    #[error("k range must be non-empty and strictly ascending")]
    InvalidKRange,
    #[error("{assignments} assignments for {records} records")]
    AssignmentMismatch { assignments: usize, records: usize },
    #[error("class {0} has no members")]
    EmptyClass(u32),
    #[error("reference window must have positive length")]
    InvalidReferenceWindow,
    #[error("row length {got} does not match column count {expected}")]
    RaggedRows { expected: usize, got: usize },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ClusterError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(ClusterError::RaggedRows { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn from_features(features: &[FeatureVector]) -> Self {
        let rows: Vec<_> = features.iter().map(FeatureVector::to_array).collect();
        Matrix::from_rows(&rows).expect("feature rows share a width")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn check_finite(&self) -> Result<(), ClusterError> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(pos) => Err(ClusterError::NonFinite {
                row: pos / self.cols.max(1),
                col: pos % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }
}

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    /// Columns with zero variance; mapped to all-zero.
    pub zero_variance_columns: Vec<usize>,
}

/// Column z-scores using the population (divide-by-n) standard deviation.
pub fn standardize(x: &Matrix) -> Result<(Matrix, Standardization), ClusterError> {
    if x.rows < 2 {
        return Err(ClusterError::TooFewRows { need: 2, got: x.rows });
    }
    x.check_finite()?;
    let n = x.rows as f64;
    let mut means = vec![0.0; x.cols];
    let mut std_devs = vec![0.0; x.cols];
    let mut zero_variance_columns = Vec::new();
    for j in 0..x.cols {
        let mean = (0..x.rows).map(|i| x.get(i, j)).sum::<f64>() / n;
        let var = (0..x.rows).map(|i| (x.get(i, j) - mean) * (x.get(i, j) - mean)).sum::<f64>() / n;
        means[j] = mean;
        std_devs[j] = sqrt(var);
        if !(std_devs[j] > 0.0) {
            zero_variance_columns.push(j);
        }
    }
    let mut data = Vec::with_capacity(x.data.len());
    for i in 0..x.rows {
        for j in 0..x.cols {
            let sd = std_devs[j];
            data.push(if sd > 0.0 { (x.get(i, j) - means[j]) / sd } else { 0.0 });
        }
    }
    Ok((
        Matrix { rows: x.rows, cols: x.cols, data },
        Standardization {
            means,
            std_devs,
            zero_variance_columns,
        },
    ))
}

/// Inverse of [`standardize`]. Zero-variance columns come back as their mean.
pub fn unstandardize(z: &Matrix, s: &Standardization) -> Matrix {
    let mut data = Vec::with_capacity(z.data.len());
    for i in 0..z.rows {
        for j in 0..z.cols {
            data.push(z.get(i, j) * s.std_devs[j] + s.means[j]);
        }
    }
    Matrix { rows: z.rows, cols: z.cols, data }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    /// Class id (1-based) per row.
    pub assignments: Vec<u32>,
    /// Centroid of class `c` at index `c - 1`, in the clustered space.
    pub centroids: Vec<Vec<f64>>,
    pub total_within_sse: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Sum of squared distances of each row to the centroid of its class.
pub fn within_sse(x: &Matrix, assignments: &[u32], centroids: &[Vec<f64>]) -> f64 {
    (0..x.rows)
        .map(|i| sq_dist(x.row(i), &centroids[assignments[i] as usize - 1]))
        .sum()
}

struct Fit {
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    sse: f64,
    iterations: usize,
}

/// Means of each cluster. An empty cluster takes the row farthest from its
/// own centroid (among clusters with more than one member), and that row is
/// moved into it.
fn update_centroids(x: &Matrix, labels: &mut [usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = previous.len();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] != 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let d = sq_dist(x.row(i), &previous[l]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            sizes[labels[i]] -= 1;
            labels[i] = empty;
            sizes[empty] = 1;
        }
    }
    let mut sums = vec![vec![0.0; x.cols]; k];
    for i in 0..x.rows {
        for (s, v) in sums[labels[i]].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(sizes.iter())
        .zip(previous)
        .map(|((s, &n), prev)| {
            if n == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|v| v / n as f64).collect()
            }
        })
        .collect()
}

fn lloyd(x: &Matrix, initial: Vec<Vec<f64>>) -> Fit {
    let mut labels: Vec<usize> = (0..x.rows).map(|i| nearest(x.row(i), &initial).0).collect();
    let mut centroids = update_centroids(x, &mut labels, &initial);
    let mut iterations = 1;
    while iterations < MAX_ITERATIONS {
        let next: Vec<usize> = (0..x.rows).map(|i| nearest(x.row(i), &centroids).0).collect();
        if next == labels {
            break;
        }
        labels = next;
        centroids = update_centroids(x, &mut labels, &centroids);
        iterations += 1;
    }
    let sse = (0..x.rows).map(|i| sq_dist(x.row(i), &centroids[labels[i]])).sum();
    Fit {
        labels,
        centroids,
        sse,
        iterations,
    }
}

/// k-means++ seeding.
fn plus_plus_seeds(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(x.row(rng.random_range(0..x.rows)).to_vec());
    let mut d2: Vec<f64> = (0..x.rows).map(|i| sq_dist(x.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = x.rows - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..x.rows)
        };
        let c = x.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn check_k(x: &Matrix, k: usize) -> Result<(), ClusterError> {
    if k < 1 || k > x.rows {
        return Err(ClusterError::InvalidK { k, rows: x.rows });
    }
    x.check_finite()
}

fn best_of_starts(x: &Matrix, k: usize, n_starts: usize, seed: u64) -> Fit {
    let mut best: Option<Fit> = None;
    for start in 0..n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, k as u64), start as u64));
        let fit = lloyd(x, plus_plus_seeds(x, k, &mut rng));
        // ties keep the earlier start
        if best.as_ref().is_none_or(|b| fit.sse < b.sse) {
            best = Some(fit);
        }
    }
    best.expect("at least one start")
}

/// Renumbers classes by ascending first centroid coordinate (the LoS column
/// for patient features), ties by original index.
fn into_result(fit: Fit, k: usize) -> ClusteringResult {
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fit.centroids[a][0].total_cmp(&fit.centroids[b][0]).then(a.cmp(&b)));
    let mut rank = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    ClusteringResult {
        k,
        assignments: fit.labels.iter().map(|&l| rank[l] as u32 + 1).collect(),
        centroids: order.iter().map(|&old| fit.centroids[old].clone()).collect(),
        total_within_sse: fit.sse,
        iterations: fit.iterations,
    }
}

/// Lloyd's algorithm from `n_starts` k-means++ seedings; keeps the start
/// with the smallest within-cluster SSE. Deterministic in
/// `(x, k, n_starts, seed)`.
pub fn kmeans(x: &Matrix, k: usize, n_starts: usize, seed: u64) -> Result<ClusteringResult, ClusterError> {
    check_k(x, k)?;
    if n_starts == 0 {
        return Err(ClusterError::NoStarts);
    }
    Ok(into_result(best_of_starts(x, k, n_starts, seed), k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub total_within_sse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowScan {
    pub curve: Vec<ElbowPoint>,
    /// `k` with the largest second difference of the SSE curve.
    pub suggested_k: usize,
    pub results: Vec<ClusteringResult>,
}

impl ElbowScan {
    pub fn result_for(&self, k: usize) -> Option<&ClusteringResult> {
        self.results.iter().find(|r| r.k == k)
    }
}

/// Runs k-means for every `k` in `ks`. When `k - 1` was also scanned, one
/// extra start is seeded from its centroids plus the row farthest from its
/// own centroid, so the SSE curve never increases.
///
/// With fewer than three points on the curve there is no second difference
/// and the smallest `k` is suggested.
pub fn elbow_scan(x: &Matrix, ks: &[usize], n_starts: usize, seed: u64) -> Result<ElbowScan, ClusterError> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ClusterError::InvalidKRange);
    }
    if n_starts == 0 {
        return Err(ClusterError::NoStarts);
    }
    for &k in ks {
        check_k(x, k)?;
    }
    let mut results: Vec<ClusteringResult> = Vec::with_capacity(ks.len());
    let mut previous: Option<Fit> = None;
    for &k in ks {
        let mut best = best_of_starts(x, k, n_starts, seed);
        if let Some(prev) = previous.as_ref().filter(|p| p.centroids.len() + 1 == k) {
            let far = (0..x.rows)
                .map(|i| (i, sq_dist(x.row(i), &prev.centroids[prev.labels[i]])))
                .fold((0, -1.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
            let mut warm = prev.centroids.clone();
            warm.push(x.row(far.0).to_vec());
            let fit = lloyd(x, warm);
            if fit.sse < best.sse {
                best = fit;
            }
        }
        results.push(into_result(
            Fit {
                labels: best.labels.clone(),
                centroids: best.centroids.clone(),
                sse: best.sse,
                iterations: best.iterations,
            },
            k,
        ));
        previous = Some(best);
    }
    let curve: Vec<ElbowPoint> = results
        .iter()
        .map(|r| ElbowPoint {
            k: r.k,
            total_within_sse: r.total_within_sse,
        })
        .collect();
    let mut suggested_k = curve[0].k;
    let mut best_curvature = f64::NEG_INFINITY;
    for w in curve.windows(3) {
        let d2 = w[0].total_within_sse - 2.0 * w[1].total_within_sse + w[2].total_within_sse;
        if d2 > best_curvature {
            best_curvature = d2;
            suggested_k = w[1].k;
        }
    }
    Ok(ElbowScan {
        curve,
        suggested_k,
        results,
    })
}

/// A non-fatal note from profile building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileWarning {
    pub class_id: u32,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub profiles: Vec<PatientClassProfile>,
    pub warnings: Vec<ProfileWarning>,
}

/// Per-class LoS quantiles (Q0..Q4), mean daily interaction rates and
/// yearly discharges. Discharges are counted in `[start, end)` of
/// `reference` and scaled to 365 days.
///
/// Class ids must run `1..=max` with no gaps.
pub fn build_class_profiles(
    patients: &[PreparedPatient],
    assignments: &[u32],
    reference: (Timestamp, Timestamp),
) -> Result<ProfileSet, ClusterError> {
    if patients.len() != assignments.len() {
        return Err(ClusterError::AssignmentMismatch {
            assignments: assignments.len(),
            records: patients.len(),
        });
    }
    let window_days = reference.1.minutes_since(reference.0) as f64 / crate::model::MINUTES_PER_DAY;
    if !(window_days > 0.0) {
        return Err(ClusterError::InvalidReferenceWindow);
    }
    let max_id = assignments.iter().copied().max().unwrap_or(0);
    let mut members: BTreeMap<u32, Vec<&PreparedPatient>> = (1..=max_id).map(|c| (c, Vec::new())).collect();
    for (p, &c) in patients.iter().zip(assignments) {
        match members.get_mut(&c) {
            Some(list) => list.push(p),
            None => return Err(ClusterError::EmptyClass(0)),
        }
    }
    let mut profiles = Vec::with_capacity(members.len());
    let mut warnings = Vec::new();
    for (class_id, list) in members {
        if list.is_empty() {
            return Err(ClusterError::EmptyClass(class_id));
        }
        let mut los: Vec<f64> = list.iter().map(|p| p.features.los_days).collect();
        crate::num::sort_floats(&mut los);
        let los_quantiles = QuantileLabel::ALL
            .iter()
            .map(|&q| (q, quantile_sorted(&los, q.probability())))
            .collect();
        let n = list.len() as f64;
        let daily_rates = ByInteraction::from_fn(|j| list.iter().map(|p| p.features.daily_rates[j]).sum::<f64>() / n);
        let discharges = list
            .iter()
            .filter(|p| p.discharge >= reference.0 && p.discharge < reference.1)
            .count();
        let member_count = list.len() as u64;
        if member_count < MIN_RELIABLE_MEMBERS {
            warnings.push(ProfileWarning {
                class_id,
                code: "los_estimate_unreliable".into(),
                message: format!("class {class_id} has only {member_count} members; its LoS quantiles are unreliable"),
            });
        }
        profiles.push(PatientClassProfile {
            class_id,
            los_quantiles,
            daily_rates,
            annual_discharges: discharges as f64 * 365.0 / window_days,
            member_count,
            arrival_rate: None,
        });
    }
    Ok(ProfileSet { profiles, warnings })
}

/// Adjusted Rand index between two labelings of the same rows.
pub fn adjusted_rand_index(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len() as f64;
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut rows: BTreeMap<u32, u64> = BTreeMap::new();
    let mut cols: BTreeMap<u32, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c as f64)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c as f64)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c as f64)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
