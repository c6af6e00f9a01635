//! Service and CLI configuration file (JSON or TOML, chosen by extension).

use std::path::{Path, PathBuf};

use ppeq_core::model::PpeUsageConfig;
use serde::Deserialize;

use crate::error::AppError;

/// The shipped default usage matrices, staff use and staffing list.
pub const DEFAULT_USAGE_JSON: &str = include_str!("../defaults/usage.json");

pub fn default_usage() -> PpeUsageConfig {
    serde_json::from_str(DEFAULT_USAGE_JSON).expect("shipped usage defaults parse")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub port: u16,
    pub data_dir: Option<PathBuf>,
    pub usage: PpeUsageConfig,
    /// Replications allowed in flight across concurrent simulate requests.
    pub simulation_budget: usize,
    pub simulation_threads: Option<usize>,
    pub log_level: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            data_dir: None,
            usage: default_usage(),
            simulation_budget: 20_000,
            simulation_threads: None,
            log_level: "info".into(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    port: Option<u16>,
    data_dir: Option<PathBuf>,
    usage: Option<PpeUsageConfig>,
    /// Path to a usage JSON file, relative to the config file.
    usage_file: Option<PathBuf>,
    simulation_budget: Option<usize>,
    simulation_threads: Option<usize>,
    log_level: Option<String>,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let bad = |message: String| AppError::Input {
            path: path.display().to_string(),
            message,
        };
        let raw: RawConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config = ServiceConfig::default();
        if raw.usage.is_some() && raw.usage_file.is_some() {
            return Err(bad("set at most one of `usage` and `usage_file`".into()));
        }
        if let Some(usage) = raw.usage {
            config.usage = usage;
        }
        if let Some(file) = raw.usage_file {
            config.usage = crate::pipeline::read_json(&base.join(file))?;
        }
        if let Some(port) = raw.port {
            config.port = port;
        }
        config.data_dir = raw.data_dir.map(|d| base.join(d));
        if let Some(budget) = raw.simulation_budget {
            if budget == 0 {
                return Err(bad("simulation_budget must be positive".into()));
            }
            config.simulation_budget = budget;
        }
        config.simulation_threads = raw.simulation_threads;
        if let Some(level) = raw.log_level {
            config.log_level = level;
        }
        Ok(config)
    }
}
