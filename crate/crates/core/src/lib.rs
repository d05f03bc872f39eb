//! Pulse-quota harvesting under environmental noise.
//!
//! A regulator opens the season the instant abundance reaches a threshold
//! `K+`, a fixed quota `Q` is taken at once, and the stock restarts from
//! `K- = K+ - Q`. Between pulses the abundance follows
//! `dN = r(N) N dt + sigma N dB`. This crate simulates that impulsive SDE
//! and checks its closed-form guarantees: closure-length bounds, pathwise
//! GBM envelopes, hitting-time expectations, and feasibility conditions.

// Validation guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`
// they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod deterministic;
pub mod error;
pub mod montecarlo;
pub mod rates;
pub mod rng;
pub mod sde;

pub use analytics::HittingExpectation;
pub use error::{Error, Result};
pub use montecarlo::{EnsembleSummary, SweepAxis};
pub use rates::{GrowthLaw, H1Report, H2Report, NoiseSpec, Policy, RateBounds};
pub use sde::{ClosureRecord, CrossingMode, SimConfig, StochTrajectory};
