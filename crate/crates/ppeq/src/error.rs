//! Error type shared by the CLI and the HTTP service, with exit codes and
//! status codes.

use ppeq_core::clustering::ClusterError;
use ppeq_core::forecast::ForecastError;
use ppeq_core::model::Violation;
use ppeq_core::nhpp::NhppError;
use ppeq_core::sim::SimError;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::DatasetError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const COMPUTATION: i32 = 5;
    pub const BUDGET: i32 = 6;
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("{message}")]
    Invalid { message: String, violations: Vec<Violation> },
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Computation(String),
    #[error("request cancelled")]
    Cancelled,
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize)]
pub struct ErrorBody<'a> {
    pub code: &'a str,
    pub message: String,
    #[serde(skip_serializing_if = "<[Violation]>::is_empty")]
    pub violations: &'a [Violation],
}

#[derive(Debug, Serialize)]
pub struct ErrorEnvelope<'a> {
    pub error: ErrorBody<'a>,
}

impl AppError {
    pub fn invalid(violations: Vec<Violation>) -> Self {
        let message = if !violations.is_empty() && violations.iter().all(|v| v.code.is_los_precondition()) {
            "scenario breaks the length-of-stay precondition (sigma > 0 and T > sigma for every class)".to_string()
        } else {
            let codes: Vec<&str> = violations.iter().map(|v| v.code.as_str()).collect();
            format!("scenario is invalid: {}", codes.join(", "))
        };
        AppError::Invalid { message, violations }
    }

    /// True when every violation is a LoS precondition failure.
    pub fn is_los_precondition(&self) -> bool {
        match self {
            AppError::Invalid { violations, .. } => {
                !violations.is_empty() && violations.iter().all(|v| v.code.is_los_precondition())
            }
            _ => false,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            AppError::InvalidArgument(_) => "invalid_argument",
            AppError::Dataset(DatasetError::Malformed { .. }) | AppError::Input { .. } => "malformed_input",
            AppError::Dataset(DatasetError::Io { .. }) | AppError::Io(_) => "io_error",
            AppError::Invalid { .. } if self.is_los_precondition() => "los_precondition",
            AppError::Invalid { .. } => "invalid_scenario",
            AppError::NotFound(_) => "not_found",
            AppError::Budget(_) => "budget_exceeded",
            AppError::Computation(_) => "computation_failed",
            AppError::Cancelled => "cancelled",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::InvalidArgument(_) => exit::USAGE,
            AppError::Dataset(DatasetError::Malformed { .. }) | AppError::Input { .. } | AppError::NotFound(_) => {
                exit::INPUT
            }
            AppError::Invalid { .. } => exit::VALIDATION,
            AppError::Computation(_) => exit::COMPUTATION,
            AppError::Budget(_) => exit::BUDGET,
            AppError::Dataset(DatasetError::Io { .. }) | AppError::Io(_) | AppError::Cancelled => exit::INTERNAL,
        }
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            AppError::Invalid { violations, .. } => violations,
            _ => &[],
        }
    }

    pub fn to_json(&self) -> String {
        let envelope = ErrorEnvelope {
            error: ErrorBody {
                code: self.code(),
                message: self.to_string(),
                violations: self.violations(),
            },
        };
        serde_json::to_string(&envelope).expect("error serializes")
    }
}

impl From<ForecastError> for AppError {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::InvalidScenario { violations } => AppError::invalid(violations),
            ForecastError::InvalidPerturbation { name, violations } => {
                let mut err = AppError::invalid(violations);
                if let AppError::Invalid { message, .. } = &mut err {
                    *message = format!("perturbation `{name}`: {message}");
                }
                err
            }
            other => AppError::Computation(other.to_string()),
        }
    }
}

impl From<SimError> for AppError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(violations) => AppError::invalid(violations),
            other => AppError::InvalidArgument(other.to_string()),
        }
    }
}

impl From<ClusterError> for AppError {
    fn from(e: ClusterError) -> Self {
        AppError::Computation(e.to_string())
    }
}

impl From<NhppError> for AppError {
    fn from(e: NhppError) -> Self {
        AppError::Computation(e.to_string())
    }
}
