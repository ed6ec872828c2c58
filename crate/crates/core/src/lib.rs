//! Selective regression: let a regressor abstain where its bootstrap
//! uncertainty is high, compare against plug-in, cross-fitted, conformal
//! and oracle selectors, and explain accept/reject decisions.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod selective;
pub mod stats;
pub mod uncertainty;

pub use error::{Error, Result};
