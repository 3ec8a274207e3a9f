//! Metrics, smoothing, significance tests, sensitivity and convergence
//! analysis over training outputs.

pub mod chart;
pub mod convergence;
pub mod metrics;
pub mod report;
pub mod savgol;
pub mod sensitivity;
pub mod stats;
