use std::collections::VecDeque;

use super::{plan, EchelonPlan, EngineOptions, IpTiming};
use crate::config::ChainConfig;
use crate::error::{Error, Result};
use crate::forecast::ForecastPair;

#[derive(Debug, Clone, PartialEq)]
pub struct EchelonState {
    /// Net inventory; negative values are backorders.
    pub on_hand: f64,
    /// In-transit orders, oldest (next to arrive) first. Length L exactly.
    pub pipeline: VecDeque<f64>,
    pub previous_order: f64,
    /// Most recent received orders, oldest first.
    pub order_history: VecDeque<f64>,
}

impl EchelonState {
    pub fn inventory_position(&self) -> f64 {
        self.on_hand + self.pipeline.iter().fold(0.0, |a, &x| a + x)
    }
}

/// Opening on-hand stock for a steady-state start.
///
/// Pipeline slots hold the prior mean. Under post-receipt timing the
/// inventory position equals the initial target S; under pre-receipt timing
/// it sits one period of demand below S, so that a period with demand equal
/// to the prior mean produces an order equal to it.
pub(crate) fn initial_on_hand(p: &EchelonPlan, prior: ForecastPair, timing: IpTiming) -> f64 {
    let target = p.ctx.out_level(prior.mean, prior.std);
    let in_transit = (0..p.lead_time).fold(0.0, |a, _| a + prior.mean);
    match timing {
        IpTiming::PostReceipt => target - in_transit,
        IpTiming::PreReceipt => target - in_transit - prior.mean,
    }
}

pub(crate) fn initial_states(plans: &[EchelonPlan], prior: ForecastPair, timing: IpTiming) -> Vec<EchelonState> {
    plans
        .iter()
        .map(|p| EchelonState {
            on_hand: initial_on_hand(p, prior, timing),
            pipeline: std::iter::repeat(prior.mean).take(p.lead_time).collect(),
            previous_order: prior.mean,
            order_history: VecDeque::new(),
        })
        .collect()
}

/// Steady-state opening state of every echelon for a given prior.
pub fn initialize_state(
    config: &ChainConfig,
    prior_mean: f64,
    prior_std: f64,
    timing: IpTiming,
) -> Result<Vec<EchelonState>> {
    if !(prior_mean.is_finite() && prior_mean >= 0.0) {
        return Err(Error::invalid("prior_mean", "must be a nonnegative number"));
    }
    if !(prior_std.is_finite() && prior_std >= 0.0) {
        return Err(Error::invalid("prior_std", "must be a nonnegative number"));
    }
    let opts = EngineOptions {
        ip_timing: timing,
        ..EngineOptions::default()
    };
    let plans = plan(config, &opts)?;
    let prior = ForecastPair {
        mean: prior_mean,
        std: prior_std,
    };
    Ok(initial_states(&plans, prior, timing))
}
