//! Discrete-time survival prediction engine.
//!
//! Estimates per-individual hazard sequences and survival curves from static
//! or longitudinal covariate data, predicts event times via the survival
//! curve's inflection point, and evaluates predictions with concordance,
//! discrimination, and timing-distance metrics.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod predict;
pub mod survival;
pub mod synthetic;

pub use error::{Error, Result};
