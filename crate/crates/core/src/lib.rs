pub mod agent;
pub mod analytics;
pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod learner;
pub mod loggen;
pub mod logmodel;
pub mod policy;
pub mod seed;

pub use error::{Error, Result};
