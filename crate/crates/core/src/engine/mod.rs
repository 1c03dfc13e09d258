//! Period-by-period simulation of a serial chain.
//!
//! Two engines share one sequence of events per period `t` and echelon `k`
//! (upstream last):
//!
//! 1. observe demand: customer demand for E1, the order just placed by
//!    `k-1` otherwise;
//! 2. forecast: supplied arrays for E1; rolling statistics of the orders
//!    received through `t-1` for upstream echelons;
//! 3. inventory position and order (see [`IpTiming`]);
//! 4. receive the order placed `L_k` periods ago, ship demand;
//! 5. incur cost on the resulting net inventory.
//!
//! [`simulate_serial`] is the reference; [`simulate_batch`] steps many paths
//! in lockstep and reproduces it bit for bit.

mod batch;
mod result;
mod serial;
mod state;

use serde::{Deserialize, Serialize};

pub use batch::simulate_batch;
pub use result::SimulationResult;
pub use serial::{simulate_paths_serial, simulate_serial};
pub use state::{initialize_state, EchelonState};

use crate::config::ChainConfig;
use crate::cost::{CostFunction, NewsvendorParams};
use crate::demand::{generate_batch, DemandGenerator};
use crate::error::{Error, Result};
use crate::forecast::{Forecaster, ForecastBatch, UPSTREAM_WINDOW};
use crate::policy::{OrderContext, OrderingPolicy};

/// When the inventory position used for ordering is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpTiming {
    /// End-of-previous-period on-hand plus the whole pipeline.
    #[default]
    PreReceipt,
    /// After this period's receipt and demand, plus the remaining pipeline.
    PostReceipt,
}

impl std::str::FromStr for IpTiming {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre_receipt" => Ok(IpTiming::PreReceipt),
            "post_receipt" => Ok(IpTiming::PostReceipt),
            _ => Err(Error::invalid("ip_timing", format!("`{s}`; expected pre_receipt or post_receipt"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    pub ip_timing: IpTiming,
    pub upstream_window: usize,
    /// Leading periods excluded from metrics.
    pub burn_in: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            ip_timing: IpTiming::PreReceipt,
            upstream_window: UPSTREAM_WINDOW,
            burn_in: 0,
        }
    }
}

/// Per-echelon constants shared by both engines.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EchelonPlan {
    pub lead_time: usize,
    pub ctx: OrderContext,
    pub costs: NewsvendorParams,
}

pub(crate) fn plan(config: &ChainConfig, opts: &EngineOptions) -> Result<Vec<EchelonPlan>> {
    config.validate()?;
    if opts.upstream_window == 0 {
        return Err(Error::invalid("upstream_window", "must be at least 1"));
    }
    config
        .echelons
        .iter()
        .map(|e| {
            Ok(EchelonPlan {
                lead_time: e.lead_time,
                ctx: OrderContext::new(e.lead_time, e.critical_fractile())?,
                costs: NewsvendorParams {
                    holding_cost: e.holding_cost,
                    backorder_cost: e.backorder_cost,
                },
            })
        })
        .collect()
}

pub(crate) fn check_inputs(demand: &[f64], means: &[f64], stds: &[f64], path: usize) -> Result<()> {
    if demand.is_empty() {
        return Err(Error::Empty("demand series"));
    }
    if means.len() != demand.len() || stds.len() != demand.len() {
        return Err(Error::ShapeMismatch(format!(
            "path {path}: demand has {} periods but forecasts have {} means and {} stds",
            demand.len(),
            means.len(),
            stds.len()
        )));
    }
    let bad = |quantity: &'static str, t: usize| Error::NonFinite {
        quantity,
        path,
        echelon: 1,
        period: t + 1,
    };
    for t in 0..demand.len() {
        if !demand[t].is_finite() {
            return Err(bad("demand", t));
        }
        if !means[t].is_finite() {
            return Err(bad("forecast mean", t));
        }
        if !(stds[t].is_finite() && stds[t] >= 0.0) {
            return Err(bad("forecast std", t));
        }
    }
    Ok(())
}

/// Generate demand, forecast it, and simulate every path in lockstep.
#[allow(clippy::too_many_arguments)]
pub fn run_montecarlo(
    config: &ChainConfig,
    generator: &dyn DemandGenerator,
    forecaster: &dyn Forecaster,
    policy: &dyn OrderingPolicy,
    cost: &dyn CostFunction,
    horizon: usize,
    paths: usize,
    seed: u64,
    opts: &EngineOptions,
) -> Result<SimulationResult> {
    let demand = generate_batch(generator, horizon, paths, seed)?;
    let fc: ForecastBatch = forecaster.generate_forecasts(&demand, generator.prior())?;
    simulate_batch(config, &demand, &fc, policy, cost, opts)
}
