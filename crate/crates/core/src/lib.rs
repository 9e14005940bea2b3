//! Simultaneous graphical dynamic linear models for a universe of
//! realized-volatility series.
//!
//! Each series carries its own conjugate Normal-Gamma DLM over multi-scale
//! log realized variance, leverage terms and the contemporaneous values of a
//! dynamically selected parent set. The joint model is recoupled by importance
//! sampling and decoupled again by variational Bayes every day.

pub mod config;
pub mod data;
pub mod dlm;
pub mod engine;
pub mod error;
pub mod features;
pub mod linalg;
pub mod metrics;
pub mod parents;
pub mod pipeline;
pub mod rng;
pub mod signals;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
