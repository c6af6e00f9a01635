//! HTTP service over a data directory.
//!
//! Layout: `DIR/scenarios/<sha256>.json` (written by `POST /scenarios`) and
//! `DIR/datasets/<id>/records.json` (provisioned by `ppeq ingest`, never
//! written by the service).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ppeq_core::forecast::{sensitivity, Perturbation};
use ppeq_core::model::{validate_scenario, PatientRecord, PpeUsageConfig, QuantileLabel, Scenario};
use ppeq_core::nhpp::SweepConfig;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::error::AppError;
use crate::formats::to_json;
use crate::pipeline::{self, ClusterParams, SimulateRequest};

pub struct AppState {
    pub data_dir: PathBuf,
    pub usage: PpeUsageConfig,
    /// Replications allowed in flight across all simulate requests.
    pub simulation_budget: usize,
    in_flight: AtomicUsize,
    pool: rayon::ThreadPool,
}

impl AppState {
    pub fn new(data_dir: PathBuf, config: &ServiceConfig) -> Result<Arc<Self>, AppError> {
        let mut builder = rayon::ThreadPoolBuilder::new().thread_name(|i| format!("ppeq-sim-{i}"));
        if let Some(n) = config.simulation_threads {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| AppError::Computation(e.to_string()))?;
        Ok(Arc::new(AppState {
            data_dir,
            usage: config.usage.clone(),
            simulation_budget: config.simulation_budget,
            in_flight: AtomicUsize::new(0),
            pool,
        }))
    }

    fn scenario_path(&self, id: &str) -> PathBuf {
        self.data_dir.join("scenarios").join(format!("{id}.json"))
    }

    fn records_path(&self, id: &str) -> PathBuf {
        self.data_dir.join("datasets").join(id).join("records.json")
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/defaults/usage", get(default_usage))
        .route("/scenarios", post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/scenarios/{id}/forecast", get(forecast))
        .route("/scenarios/{id}/sensitivity", post(run_sensitivity))
        .route("/datasets/{id}/clusters", get(clusters))
        .route("/datasets/{id}/nhpp", get(nhpp))
        .route("/simulate", post(simulate))
        .with_state(state)
}

pub fn status_for(err: &AppError) -> StatusCode {
    match err {
        AppError::Invalid { .. } if err.is_los_precondition() => StatusCode::UNPROCESSABLE_ENTITY,
        AppError::Invalid { .. } | AppError::InvalidArgument(_) | AppError::Input { .. } | AppError::Dataset(_) => {
            StatusCode::BAD_REQUEST
        }
        AppError::NotFound(_) => StatusCode::NOT_FOUND,
        AppError::Budget(_) | AppError::Cancelled => StatusCode::SERVICE_UNAVAILABLE,
        AppError::Computation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        AppError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = status_for(&self);
        if status.is_server_error() {
            tracing::error!(code = self.code(), error = %self, "request failed");
        } else {
            tracing::info!(code = self.code(), error = %self, "request rejected");
        }
        let mut body = self.to_json().into_bytes();
        body.push(b'\n');
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], to_json(value)).into_response()
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, AppError> {
    serde_json::from_slice(body).map_err(|e| AppError::Input {
        path: "request body".into(),
        message: e.to_string(),
    })
}

fn check_scenario_id(id: &str) -> Result<(), AppError> {
    if id.len() == 64 && id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        Ok(())
    } else {
        Err(AppError::NotFound(format!("scenario `{id}`")))
    }
}

fn check_dataset_id(id: &str) -> Result<(), AppError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.')
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(AppError::NotFound(format!("dataset `{id}`")))
    }
}

fn read_if_exists(path: &Path, what: String) -> Result<Vec<u8>, AppError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(AppError::NotFound(what)),
        Err(e) => Err(AppError::Io(e)),
    }
}

async fn load_scenario(state: &AppState, id: &str) -> Result<Scenario, AppError> {
    check_scenario_id(id)?;
    let bytes = read_if_exists(&state.scenario_path(id), format!("scenario `{id}`"))?;
    serde_json::from_slice(&bytes).map_err(|e| AppError::Computation(format!("stored scenario `{id}`: {e}")))
}

async fn load_records(state: &AppState, id: &str) -> Result<Vec<PatientRecord>, AppError> {
    check_dataset_id(id)?;
    let bytes = read_if_exists(&state.records_path(id), format!("dataset `{id}`"))?;
    serde_json::from_slice(&bytes).map_err(|e| AppError::Computation(format!("dataset `{id}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(raw: &str, name: &str) -> Result<Vec<T>, AppError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| AppError::InvalidArgument(format!("{name}: `{s}`: {e}"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(raw: &str, name: &str) -> Result<T, AppError>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse::<T>()
        .map_err(|e| AppError::InvalidArgument(format!("{name}: `{raw}`: {e}")))
}

fn quantiles(query: &HashMap<String, String>) -> Result<Vec<QuantileLabel>, AppError> {
    match query.get("quantiles") {
        Some(raw) => {
            let labels = parse_list::<QuantileLabel>(raw, "quantiles")?;
            if labels.is_empty() {
                return Err(AppError::InvalidArgument("quantiles: empty list".into()));
            }
            Ok(labels)
        }
        None => Ok(QuantileLabel::BOUNDS.to_vec()),
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, AppError> + Send + 'static,
) -> Result<T, AppError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Computation(format!("worker failed: {e}")))?
}

async fn health() -> Response {
    json_response(StatusCode::OK, &serde_json::json!({ "status": "ok" }))
}

async fn default_usage(State(state): State<Arc<AppState>>) -> Response {
    json_response(StatusCode::OK, &state.usage)
}

#[derive(Serialize)]
struct Created<'a> {
    id: &'a str,
}

async fn create_scenario(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let scenario: Scenario = parse_body(&body)?;
    let violations = validate_scenario(&scenario);
    if !violations.is_empty() {
        return Err(AppError::invalid(violations));
    }
    let id = scenario.content_hash();
    let path = state.scenario_path(&id);
    if !path.exists() {
        std::fs::create_dir_all(path.parent().expect("scenario dir"))?;
        // write-then-rename so concurrent readers never see a partial file
        let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
        std::fs::write(&tmp, to_json(&scenario))?;
        std::fs::rename(&tmp, &path)?;
        tracing::info!(scenario = %id, "stored scenario");
    }
    Ok(json_response(StatusCode::CREATED, &Created { id: &id }))
}

async fn get_scenario(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, AppError> {
    let scenario = load_scenario(&state, &id).await?;
    Ok(json_response(StatusCode::OK, &scenario))
}

async fn forecast(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, AppError> {
    let labels = quantiles(&query)?;
    let scenario = load_scenario(&state, &id).await?;
    let report = pipeline::forecast(&scenario, &labels)?;
    Ok(json_response(StatusCode::OK, &report))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensitivityRequest {
    perturbations: Vec<Perturbation>,
    #[serde(default)]
    quantiles: Option<Vec<QuantileLabel>>,
}

async fn run_sensitivity(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, AppError> {
    let scenario = load_scenario(&state, &id).await?;
    let req: SensitivityRequest = parse_body(&body)?;
    let labels = req.quantiles.unwrap_or_else(|| QuantileLabel::BOUNDS.to_vec());
    let violations = validate_scenario(&scenario);
    if !violations.is_empty() {
        return Err(AppError::invalid(violations));
    }
    let report = sensitivity(&scenario, &req.perturbations, &labels)?;
    Ok(json_response(StatusCode::OK, &report))
}

pub fn cluster_params(query: &HashMap<String, String>) -> Result<ClusterParams, AppError> {
    let mut params = ClusterParams::default();
    if let Some(raw) = query.get("k") {
        params.k = Some(parse_one(raw, "k")?);
    }
    if let Some(raw) = query.get("seed") {
        params.seed = parse_one(raw, "seed")?;
    }
    if let Some(raw) = query.get("starts") {
        params.starts = parse_one(raw, "starts")?;
    }
    if let Some(raw) = query.get("window_hours") {
        params.window_hours = parse_one(raw, "window_hours")?;
    }
    if let Some(raw) = query.get("all_k") {
        params.all_k = parse_one(raw, "all_k")?;
    }
    if let Some(raw) = query.get("k_range") {
        params.ks = crate::cli::parse_k_range(raw).map_err(AppError::InvalidArgument)?;
    }
    Ok(params)
}

async fn clusters(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, AppError> {
    let params = cluster_params(&query)?;
    let records = load_records(&state, &id).await?;
    let out = blocking(move || pipeline::cluster(&records, &params)).await?;
    Ok(json_response(StatusCode::OK, &out))
}

pub const DEFAULT_INTERVALS: [usize; 6] = [10, 20, 30, 40, 80, 800];

async fn nhpp(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, AppError> {
    let intervals = match query.get("intervals") {
        Some(raw) => parse_list::<usize>(raw, "intervals")?,
        None => DEFAULT_INTERVALS.to_vec(),
    };
    let mut config = SweepConfig::default();
    if let Some(raw) = query.get("alpha") {
        config.alpha = parse_one(raw, "alpha")?;
    }
    if let Some(raw) = query.get("min_events") {
        config.min_events = parse_one(raw, "min_events")?;
    }
    let records = load_records(&state, &id).await?;
    let out = blocking(move || pipeline::nhpp_sweep(&records, &intervals, None, config)).await?;
    Ok(json_response(StatusCode::OK, &out))
}

/// Releases reserved replications when the worker finishes.
struct Reservation {
    state: Arc<AppState>,
    reps: usize,
}

impl Drop for Reservation {
    fn drop(&mut self) {
        self.state.in_flight.fetch_sub(self.reps, Ordering::SeqCst);
    }
}

/// Flags the worker to stop when the request future is dropped (client
/// gone) before the result is delivered.
struct CancelOnDrop(Option<Arc<AtomicBool>>);

impl CancelOnDrop {
    fn disarm(mut self) {
        self.0 = None;
    }
}

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        if let Some(flag) = &self.0 {
            flag.store(true, Ordering::Relaxed);
        }
    }
}

fn reserve(state: &Arc<AppState>, reps: usize) -> Result<Reservation, AppError> {
    let mut current = state.in_flight.load(Ordering::SeqCst);
    loop {
        let next = current + reps;
        if next > state.simulation_budget {
            return Err(AppError::Budget(format!(
                "simulation budget exhausted: {current} replications in flight, {reps} requested, budget {}",
                state.simulation_budget
            )));
        }
        match state.in_flight.compare_exchange(current, next, Ordering::SeqCst, Ordering::SeqCst) {
            Ok(_) => {
                return Ok(Reservation {
                    state: state.clone(),
                    reps,
                })
            }
            Err(actual) => current = actual,
        }
    }
}

async fn simulate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let req: SimulateRequest = parse_body(&body)?;
    if req.reps > pipeline::MAX_REPLICATIONS {
        return Err(AppError::Budget(format!(
            "{} replications requested; the limit is {}",
            req.reps,
            pipeline::MAX_REPLICATIONS
        )));
    }
    let reservation = reserve(&state, req.reps)?;
    let cancel = Arc::new(AtomicBool::new(false));
    let guard = CancelOnDrop(Some(cancel.clone()));
    let worker_state = state.clone();
    let result = blocking(move || {
        let _reservation = reservation;
        worker_state.pool.install(|| pipeline::simulate(&req, &cancel))
    })
    .await;
    guard.disarm();
    Ok(json_response(StatusCode::OK, &result?))
}
