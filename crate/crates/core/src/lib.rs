//! Extreme-value margin setting for standard and inverse perpetual futures.
//!
//! The pipeline turns a price file into percentage changes at several
//! monitoring frequencies, extracts non-overlapping block extremes, fits a
//! GEV distribution to each tail by maximum likelihood and converts the
//! fits into margins for a given margin-call probability. A separate set of
//! daily analytics estimates implied leverage and speculation from OHLCV and
//! liquidation data.

pub mod analytics;
pub mod error;
pub mod extremes;
pub mod gev;
pub mod margins;
pub mod normal;
pub mod optim;
pub mod pipeline;
pub mod stats;
pub mod synthetic;
pub mod timeseries;

pub use error::{Error, Result};
