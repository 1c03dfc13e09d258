//! Monte Carlo simulation of demand amplification in serial supply chains.

pub mod analysis;
pub mod benchmark;
pub mod config;
pub mod cost;
pub mod demand;
pub mod engine;
pub mod error;
pub mod forecast;
pub mod io;
pub mod metrics;
pub mod normal;
pub mod policy;
pub mod protocols;
pub mod registry;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
