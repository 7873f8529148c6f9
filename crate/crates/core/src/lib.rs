//! Climate-scenario analysis of highly renewable electricity systems.
//!
//! Gridded wind speed, irradiance and temperature fields are turned into
//! per-country wind and solar capacity factors and temperature-corrected
//! demand. From those, the generation-load mismatch of a wind/solar mix is
//! formed and summarized by four key metrics, which are then compared across
//! scenarios and climate models.
//!
//! Pipeline order:
//!
//! 1. [`weather`] loads grids, fields and country weights;
//! 2. [`convert`] turns drivers into capacity factors (convert, then aggregate);
//! 3. [`bias`] fits a driver scale on the historical period by relative entropy;
//! 4. [`demand`] fits a degree-day regression and synthesizes scenario demand;
//! 5. [`mismatch`] normalizes on the historical period and forms Δ, B and C;
//! 6. [`metrics`] and [`stats`] compute K1–K4, windows, t-tests and box summaries.
//!
//! [`synth`] produces deterministic desk-scale inputs and [`pipeline`] drives
//! the whole chain from a config file.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the file-based pipeline.

pub mod bias;
pub mod convert;
pub mod demand;
pub mod metrics;
pub mod mismatch;
pub mod pipeline;
mod scalar;
pub mod stats;
pub mod synth;
pub mod weather;

pub use scalar::Scalar;

pub type FieldSeries64 = weather::FieldSeries<f64>;
pub type FieldSeries32 = weather::FieldSeries<f32>;
pub type CapacityFactorSeries64 = convert::CapacityFactorSeries<f64>;
pub type CapacityFactorSeries32 = convert::CapacityFactorSeries<f32>;
pub type DemandSeries64 = demand::DemandSeries<f64>;
pub type DemandSeries32 = demand::DemandSeries<f32>;
pub type MismatchSet64 = mismatch::MismatchSet<f64>;
pub type MismatchSet32 = mismatch::MismatchSet<f32>;
pub type KeyMetrics64 = metrics::KeyMetrics<f64>;
pub type KeyMetrics32 = metrics::KeyMetrics<f32>;
