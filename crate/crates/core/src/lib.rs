//! Regression discontinuity in time for strike-level casualty data.
//!
//! The numerical core ([`localpoly`], [`rd`], [`breaks`], [`robustness`]) is
//! generic over [`Scalar`] (`f32` or `f64`); the `*64` / `*32` aliases below
//! name the concrete instantiations. Data ingestion, Monte Carlo accounting
//! and reporting work in `f64`.

pub mod breaks;
pub mod counterfactual;
pub mod data;
pub mod dist;
pub mod error;
pub mod linalg;
pub mod localpoly;
pub mod month;
pub mod plot;
pub mod rd;
pub mod report;
pub mod robustness;
pub mod scalar;

pub use error::{Error, ErrorClass, Result};
pub use month::YearMonth;
pub use scalar::Scalar;

pub type WlsFit64 = localpoly::WlsFit<f64>;
pub type WlsFit32 = localpoly::WlsFit<f32>;
pub type LocalFit64 = localpoly::LocalFit<f64>;
pub type LocalFit32 = localpoly::LocalFit<f32>;
pub type RdEstimate64 = rd::RdEstimate<f64>;
pub type RdEstimate32 = rd::RdEstimate<f32>;
pub type Bandwidths64 = rd::Bandwidths<f64>;
pub type Bandwidths32 = rd::Bandwidths<f32>;
pub type BreakEstimate64 = breaks::BreakEstimate<f64>;
pub type BreakEstimate32 = breaks::BreakEstimate<f32>;
pub type ChowTest64 = breaks::ChowTest<f64>;
pub type ChowTest32 = breaks::ChowTest<f32>;
pub type AnovaResult64 = robustness::AnovaResult<f64>;
pub type AnovaResult32 = robustness::AnovaResult<f32>;
pub type RollingResult64 = robustness::RollingResult<f64>;
pub type RollingResult32 = robustness::RollingResult<f32>;
pub type Autocorrelation64 = robustness::Autocorrelation<f64>;
pub type Autocorrelation32 = robustness::Autocorrelation<f32>;
