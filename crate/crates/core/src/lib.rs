//! Forecasting heterogeneous daily series with time-series marginals bound
//! together by an R-vine copula.

pub mod distributions;
pub mod error;
pub mod forecast;
pub mod frame;
pub mod metrics;
pub mod numerics;
pub mod paircop;
pub mod pipeline;
pub mod sentiment;
pub mod synth;
pub mod vine;

pub use error::{Error, Result};
