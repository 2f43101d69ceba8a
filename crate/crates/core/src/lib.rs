//! Pool-based Bayesian-optimization benchmarking on finite protein fitness
//! landscapes: surrogates, acquisition rules, paired campaign simulation,
//! outcome metrics, landscape profiling, and rank statistics.

pub mod acquisition;
pub mod analysis;
pub mod campaign;
pub mod encoding;
pub mod error;
pub mod landscape;
pub mod metrics;
pub mod seeds;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
