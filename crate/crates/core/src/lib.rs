//! Evaluate retail demand forecasts by the inventory cost and fill rate they
//! produce in a newsvendor simulation, alongside the usual accuracy measures.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod echelon2;
pub mod error;
pub mod features;
pub mod forecast;
pub mod forecast_io;
pub mod metrics;
pub mod newsvendor;
pub(crate) mod optim;
pub mod panel;
pub mod pipeline;
pub mod sweep;
pub mod synthetic;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use forecast::{ForecastSet, Forecaster, Split};
pub use newsvendor::{CostParams, SimOutcome};
pub use panel::{DayWindow, SeriesKey, SeriesPanel};
