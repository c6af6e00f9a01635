//! File formats, pipeline orchestration, CLI and HTTP service around
//! `ppeq-core`.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod service;
pub mod time;

pub use error::AppError;
