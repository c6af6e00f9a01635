//! Demand forecasting for consumable protective equipment (PPE) in an inpatient
//! service.
//!
//! Every patient class is an independent infinite-server queue fed by a
//! time-varying Poisson arrival stream. Conditioning each class on a quantile
//! of its length-of-stay gives a closed-form expected demand per PPE type,
//! split into a staff baseline and per-class interaction usage. The
//! [`sim`] module is a discrete-event oracle for those closed forms and a
//! synthetic-data generator.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! HTTP service live in the `ppeq` crate.

#![no_std]

extern crate alloc;

pub mod clustering;
pub mod forecast;
pub mod ingest;
pub mod model;
pub mod nhpp;
pub mod num;
pub mod sim;

pub use model::{
    ArrivalEstimator, ByInteraction, ByPpe, ForecastReport, InteractionType, PatientClassProfile,
    PatientRecord, PpeType, PpeUsageConfig, QuantileLabel, Scenario, Timestamp,
};
