//! Command-line interface.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppeq_core::model::{PatientClassProfile, PatientRecord, PpeUsageConfig, QuantileLabel, Scenario};
use ppeq_core::nhpp::SweepConfig;
use ppeq_core::sim::{generate_synthetic_dataset, three_class_spec, GeneratorSpec, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::dataset;
use crate::error::AppError;
use crate::formats::{self, to_json};
use crate::pipeline::{self, ClusterOutput, ClusterParams, ForecastParams, SimulateRequest};
use crate::time::parse_timestamp;

#[derive(Debug, Parser)]
#[command(name = "ppeq", version, about = "PPE demand forecasting from inpatient records")]
pub struct Cli {
    /// Configuration file (JSON or TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Join the admissions, interactions and ICU CSVs into a records file.
    Ingest(IngestArgs),
    /// Stationarity sweep of the admission process.
    NhppTest(NhppArgs),
    /// Elbow scan, k-means and class profiles.
    Cluster(ClusterArgs),
    /// Closed-form demand bounds per PPE type.
    Forecast(ForecastArgs),
    /// Monte Carlo check of a scenario against the closed form.
    Simulate(SimulateArgs),
    /// Write a synthetic dataset as the three ingestion CSVs plus labels.
    Generate(GenerateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Print the built-in default usage configuration.
    Defaults,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub admissions: PathBuf,
    #[arg(long)]
    pub interactions: PathBuf,
    #[arg(long)]
    pub icu: PathBuf,
    /// Records file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Rejects report (JSON lines); defaults to `<out>.rejects.jsonl`.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NhppArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10usize, 20, 30, 40, 80, 800])]
    pub intervals: Vec<usize>,
    #[arg(long, default_value_t = ppeq_core::nhpp::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = ppeq_core::nhpp::DEFAULT_MIN_EVENTS)]
    pub min_events: usize,
    /// Window start (timestamp); defaults to the first admission's midnight.
    #[arg(long, requires = "window_end")]
    pub window_start: Option<String>,
    #[arg(long, requires = "window_start")]
    pub window_end: Option<String>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-interval diagnostics (JSON).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Inclusive range `a..b` (or a comma list).
    #[arg(long, default_value = "1..10")]
    pub k_range: String,
    /// Use this k instead of the elbow suggestion.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ppeq_core::clustering::DEFAULT_STARTS)]
    pub starts: usize,
    /// Deduplication window in hours.
    #[arg(long, default_value_t = ppeq_core::ingest::DEFAULT_DEDUP_WINDOW_HOURS)]
    pub window_hours: f64,
    #[arg(long, requires = "reference_end")]
    pub reference_start: Option<String>,
    #[arg(long, requires = "reference_start")]
    pub reference_end: Option<String>,
    /// Keep profiles for every scanned k.
    #[arg(long)]
    pub all_k: bool,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `admission_id,class_id` CSV.
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    /// `admission_id,x,y` embedding to colour by class.
    #[arg(long, requires = "scatter")]
    pub embedding: Option<PathBuf>,
    #[arg(long, requires = "embedding")]
    pub scatter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Cluster output or a JSON array of class profiles.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub profiles: Option<PathBuf>,
    /// A complete scenario; overrides every other model input.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, conflicts_with = "scenario")]
    pub usage: Option<PathBuf>,
    #[arg(long = "T", alias = "horizon-days", default_value_t = 365.0, conflicts_with = "scenario")]
    pub horizon_days: f64,
    #[arg(long, value_delimiter = ',', default_values = ["q1", "median", "q3"])]
    pub quantiles: Vec<String>,
    #[arg(long, default_value_t = 1.0, conflicts_with = "scenario")]
    pub arrival_scale: f64,
    /// Forecast at each of these cluster counts (needs `cluster --all-k`).
    #[arg(long, value_delimiter = ',', conflicts_with = "scenario")]
    pub clusters: Vec<usize>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON report (an array when `--clusters` is given).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulation model options (JSON).
    #[arg(long)]
    pub sim_config: Option<PathBuf>,
    #[arg(long)]
    pub include_replications: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Default,
    ThreeClass,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator spec (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default")]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

/// Parses `a..b` (inclusive), `a..=b` or `a,b,c`.
pub fn parse_k_range(raw: &str) -> Result<Vec<usize>, String> {
    let raw = raw.trim();
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("k range `{raw}`: {e}"));
    let ks: Vec<usize> = if let Some((a, b)) = raw.split_once("..") {
        let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("k range `{raw}` is empty"));
        }
        (a..=b).collect()
    } else {
        raw.split(',').map(parse).collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("k range `{raw}` must be increasing positive integers"));
    }
    Ok(ks)
}

pub fn parse_quantiles(raw: &[String]) -> Result<Vec<QuantileLabel>, AppError> {
    if raw.is_empty() {
        return Err(AppError::InvalidArgument("--quantiles: empty list".into()));
    }
    raw.iter()
        .map(|s| s.trim().parse().map_err(|e| AppError::InvalidArgument(format!("--quantiles: {e}"))))
        .collect()
}

fn window(start: &Option<String>, end: &Option<String>) -> Result<Option<(ppeq_core::Timestamp, ppeq_core::Timestamp)>, AppError> {
    match (start, end) {
        (Some(a), Some(b)) => {
            let a = parse_timestamp(a).map_err(AppError::InvalidArgument)?;
            let b = parse_timestamp(b).map_err(AppError::InvalidArgument)?;
            if b <= a {
                return Err(AppError::InvalidArgument("window end must follow its start".into()));
            }
            Ok(Some((a, b)))
        }
        _ => Ok(None),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_bytes(path: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), AppError> {
    match path {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(bytes)?;
            f.flush()?;
        }
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> AppError {
    AppError::Io(std::io::Error::other(e))
}

#[derive(Serialize)]
struct IngestSummary {
    records: usize,
    rejects: usize,
    out: String,
    rejects_file: String,
}

fn ingest(args: &IngestArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let parsed = dataset::parse_dataset_files(&args.admissions, &args.interactions, &args.icu)?;
    let rejects_path = args.rejects.clone().unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".rejects.jsonl");
        PathBuf::from(name)
    });
    write_bytes(Some(&args.out), stdout, &to_json(&parsed.records))?;
    let mut f = create(&rejects_path)?;
    dataset::write_rejects(&mut f, &parsed.rejects)?;
    f.flush()?;
    tracing::info!(records = parsed.records.len(), rejects = parsed.rejects.len(), "ingested");
    stdout.write_all(&to_json(&IngestSummary {
        records: parsed.records.len(),
        rejects: parsed.rejects.len(),
        out: args.out.display().to_string(),
        rejects_file: rejects_path.display().to_string(),
    }))?;
    Ok(())
}

fn nhpp_test(args: &NhppArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let records: Vec<PatientRecord> = pipeline::read_json(&args.records)?;
    let config = SweepConfig {
        alpha: args.alpha,
        min_events: args.min_events,
    };
    let outcome = pipeline::nhpp_sweep(
        &records,
        &args.intervals,
        window(&args.window_start, &args.window_end)?,
        config,
    )?;
    let mut buf = Vec::new();
    formats::write_sweep_csv(&mut buf, &outcome.rows).map_err(csv_err)?;
    write_bytes(args.out.as_deref(), stdout, &buf)?;
    if let Some(p) = &args.diagnostics {
        write_bytes(Some(p), stdout, &to_json(&outcome))?;
    }
    Ok(())
}

fn cluster(args: &ClusterArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let records: Vec<PatientRecord> = pipeline::read_json(&args.records)?;
    let params = ClusterParams {
        ks: parse_k_range(&args.k_range).map_err(AppError::InvalidArgument)?,
        k: args.k,
        seed: args.seed,
        starts: args.starts,
        window_hours: args.window_hours,
        reference: window(&args.reference_start, &args.reference_end)?,
        all_k: args.all_k,
    };
    let out = pipeline::cluster(&records, &params)?;
    for w in &out.warnings {
        tracing::warn!(class_id = w.class_id, code = %w.code, "{}", w.message);
    }
    write_bytes(args.out.as_deref(), stdout, &to_json(&out))?;
    if let Some(p) = &args.assignments {
        let mut f = create(p)?;
        formats::write_assignments_csv(&mut f, &out.admission_ids, &out.result.assignments).map_err(csv_err)?;
    }
    if let (Some(e), Some(s)) = (&args.embedding, &args.scatter) {
        let file = File::open(e).map_err(|err| AppError::Input {
            path: e.display().to_string(),
            message: err.to_string(),
        })?;
        let points = formats::read_embedding(file, &e.display().to_string())?;
        let mut f = create(s)?;
        formats::write_scatter_csv(&mut f, &points, &out.admission_ids, &out.result.assignments).map_err(csv_err)?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProfilesFile {
    Cluster(Box<ClusterOutput>),
    List(Vec<PatientClassProfile>),
}

fn forecast(args: &ForecastArgs, config: &ServiceConfig, stdout: &mut dyn Write) -> Result<(), AppError> {
    let labels = parse_quantiles(&args.quantiles)?;
    let mut reports = Vec::new();
    if let Some(path) = &args.scenario {
        let scenario: Scenario = pipeline::read_json(path)?;
        reports.push(pipeline::forecast(&scenario, &labels)?);
    } else {
        let path = args.profiles.as_ref().expect("clap requires profiles or scenario");
        let usage: PpeUsageConfig = match &args.usage {
            Some(p) => pipeline::read_json(p)?,
            None => config.usage.clone(),
        };
        let params = ForecastParams {
            usage,
            horizon_days: args.horizon_days,
            labels: labels.clone(),
            arrival_scale: args.arrival_scale,
        };
        let file: ProfilesFile = pipeline::read_json(path)?;
        if args.clusters.is_empty() {
            let profiles = match file {
                ProfilesFile::Cluster(c) => c.profiles,
                ProfilesFile::List(list) => list,
            };
            reports.push(pipeline::forecast(&params.scenario(profiles), &labels)?);
        } else {
            for &k in &args.clusters {
                let profiles = match &file {
                    ProfilesFile::Cluster(c) => c.profiles_for(k).map(<[_]>::to_vec),
                    ProfilesFile::List(list) => (list.len() == k).then(|| list.clone()),
                }
                .ok_or_else(|| {
                    AppError::InvalidArgument(format!(
                        "no profiles for {k} clusters in {} (run `cluster --all-k`)",
                        path.display()
                    ))
                })?;
                reports.push(pipeline::forecast(&params.scenario(profiles), &labels)?);
            }
        }
    }
    let mut buf = Vec::new();
    formats::write_forecast_csv(&mut buf, &reports).map_err(csv_err)?;
    write_bytes(args.csv.as_deref(), stdout, &buf)?;
    if let Some(p) = &args.json {
        let bytes = if args.clusters.is_empty() {
            to_json(&reports[0])
        } else {
            to_json(&reports)
        };
        write_bytes(Some(p), stdout, &bytes)?;
    }
    Ok(())
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let scenario: Scenario = pipeline::read_json(&args.scenario)?;
    let config: SimulationConfig = match &args.sim_config {
        Some(p) => pipeline::read_json(p)?,
        None => SimulationConfig::default(),
    };
    let req = SimulateRequest {
        scenario,
        reps: args.reps,
        seed: args.seed,
        config,
        include_replications: args.include_replications,
    };
    let response = pipeline::simulate(&req, &AtomicBool::new(false))?;
    if !response.comparison.all_within_3se {
        tracing::warn!("simulated mean differs from the closed form by more than 3 SE for some PPE type");
    }
    write_bytes(args.out.as_deref(), stdout, &to_json(&response))
}

#[derive(Serialize)]
struct GenerateSummary {
    records: usize,
    out: String,
}

fn generate(args: &GenerateArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let spec: GeneratorSpec = match (&args.spec, args.preset) {
        (Some(p), _) => pipeline::read_json(p)?,
        (None, Preset::Default) => GeneratorSpec::default(),
        (None, Preset::ThreeClass) => three_class_spec(),
    };
    let data = generate_synthetic_dataset(&spec, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let dir = &args.out;
    let mut f = create(&dir.join("admissions.csv"))?;
    dataset::write_admissions_csv(&mut f, &data.records).map_err(csv_err)?;
    let mut f = create(&dir.join("interactions.csv"))?;
    dataset::write_interactions_csv(&mut f, &data.records).map_err(csv_err)?;
    let mut f = create(&dir.join("icu_stays.csv"))?;
    dataset::write_icu_csv(&mut f, &data.records).map_err(csv_err)?;
    let mut f = create(&dir.join("labels.csv"))?;
    dataset::write_labels_csv(&mut f, &data.labels).map_err(csv_err)?;
    stdout.write_all(&to_json(&GenerateSummary {
        records: data.records.len(),
        out: dir.display().to_string(),
    }))?;
    Ok(())
}

fn serve(args: &ServeArgs, mut config: ServiceConfig) -> Result<(), AppError> {
    if let Some(port) = args.port {
        config.port = port;
    }
    let data = args
        .data
        .clone()
        .or_else(|| config.data_dir.clone())
        .ok_or_else(|| AppError::InvalidArgument("--data is required (or `data_dir` in the config)".into()))?;
    if !data.is_dir() {
        return Err(AppError::NotFound(format!("data directory `{}`", data.display())));
    }
    let state = crate::service::AppState::new(data.clone(), &config)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, config.port);
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        tracing::info!(addr = %listener.local_addr()?, data = %data.display(), "listening");
        axum::serve(listener, crate::service::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

/// Runs one command. Results go to `stdout`; errors are returned for the
/// caller to report.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), AppError> {
    if let Command::Defaults = cli.command {
        stdout.write_all(&to_json(&PpeUsageConfig::hospital_default()))?;
        return Ok(());
    }
    let config = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    match &cli.command {
        Command::Ingest(a) => ingest(a, stdout),
        Command::NhppTest(a) => nhpp_test(a, stdout),
        Command::Cluster(a) => cluster(a, stdout),
        Command::Forecast(a) => forecast(a, &config, stdout),
        Command::Simulate(a) => simulate(a, stdout),
        Command::Generate(a) => generate(a, stdout),
        Command::Serve(a) => serve(a, config),
        Command::Defaults => unreachable!("handled above"),
    }
}
