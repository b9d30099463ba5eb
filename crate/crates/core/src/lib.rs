//! Space-time ARIMA forecasting for traffic corridors where the temporal lag
//! between stations follows the prevailing speed.
//!
//! The pipeline runs in stages:
//!
//! 1. [`data`]: ingest per-station flow and speed readings, smooth and difference them.
//! 2. [`clustering`]: group smoothed speeds with one-dimensional ISODATA.
//! 3. [`partition`]: turn speed clusters into contiguous speed regimes over the day.
//! 4. [`lags`]: derive station-pair temporal lags from distance and regime speed
//!    (or from the cross-correlation in [`ccf`]).
//! 5. [`starima`]: fit and forecast the space-time model whose lag structure
//!    switches with the regime.
//! 6. [`metrics`] and [`evaluate`]: score forecasts against fixed-lag and ARIMA baselines.
//!
//! [`synth`] generates corridors with planted lags and regimes for verification.

pub mod ccf;
pub mod clustering;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod lags;
pub mod metrics;
pub mod partition;
pub mod starima;
pub mod synth;

pub use error::{Error, Result};
