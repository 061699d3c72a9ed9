//! Graphon-level predictive synthesis for random networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`graphon`]: piecewise-constant kernels, L² geometry, functionals and
//!   the integral-operator spectral radius.
//! * [`agents`]: finite-graph agent models, entropic tilts, ERGM stacking,
//!   moment calibration and exact small-`n` enumeration.
//! * [`synthesis`]: least-squares, ridge and simplex synthesis weights.
//! * [`sampling`]: dense and sparse graph sampling and phase sweeps.
//! * [`netstats`]: finite-graph statistics, centralities and tail analysis.
//! * [`evaluation`]: holdout splits, scoring rules and paired gaps.
//! * [`experiments`]: edge-list ingestion, agent fitting and run orchestration.

pub mod agents;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod graphon;
pub mod netstats;
pub mod sampling;
pub mod synthesis;

pub use error::{Error, Result};
