//! Ordinal pattern statistics for univariate time series.
//!
//! The crate covers the whole pipeline from a CSV column to test results:
//!
//! - [`series`]: loading, missing values, log transform and tie-breaking jitter
//! - [`patterns`]: order pattern encoding and lag-averaged frequencies
//! - [`ordstats`]: turning rate, up-down balance, persistence and entropies
//! - [`models`]: Brownian motion and AR(1) simulation, exact BM pattern table
//! - [`hypotest`]: Monte Carlo distance test, coin-toss and Bienaymé tests,
//!   variance of the estimators across lags
//! - [`changepoint`]: change-point curves, binary segmentation and significance
//!
//! Monte Carlo routines take a master seed; trajectory `i` always uses
//! substream `i`, so results are identical for any number of threads.

pub mod changepoint;
pub mod error;
pub mod hypotest;
pub mod models;
pub mod ordstats;
pub mod patterns;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
pub use patterns::{LagSet, PatternDistribution, PatternIndex};
pub use series::TimeSeries;
