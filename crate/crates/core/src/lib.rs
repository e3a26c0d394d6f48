//! Stochastic power-system frequency simulation and frequency-asymmetry
//! metrics.
//!
//! The crate integrates a stochastic differential-algebraic model of a small
//! transmission grid (classical machines with droop governors, an optional
//! curtailed wind plant with droop-based active power control, single-area
//! AGC, mean-reverting jump-diffusion load and wind noise) and measures the
//! resulting frequency distribution: split standard deviations below and
//! above nominal, their difference, and minutes spent outside a band.
//!
//! ```no_run
//! use freqasym::{grid::sysfile::wscc9, metrics::MetricsReport, scenario::Scenario};
//!
//! let scenario = Scenario::builtin(1).unwrap();
//! let (trace, _summary) = scenario.simulate(&wscc9(), 7).unwrap();
//! let report = MetricsReport::compute(&trace, 0.1).unwrap();
//! println!("{}", report.to_text());
//! ```

pub mod analyzer;
pub mod engine;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod scenario;
pub mod stochastic;

pub use error::{Error, Result};
