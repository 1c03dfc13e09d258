//! Per-period inventory cost functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::positive_part;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewsvendorParams {
    pub holding_cost: f64,
    pub backorder_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerishableParams {
    pub base: NewsvendorParams,
    pub obsolescence_rate: f64,
    pub buffer: f64,
}

/// h [I]^+ + b [-I]^+
#[inline(always)]
pub fn newsvendor_cost(p: &NewsvendorParams, inventory: f64) -> f64 {
    p.holding_cost * positive_part(inventory) + p.backorder_cost * positive_part(-inventory)
}

/// Newsvendor plus `gamma [I - buffer]^+` on stock above the buffer.
#[inline(always)]
pub fn perishable_cost(p: &PerishableParams, inventory: f64) -> f64 {
    newsvendor_cost(&p.base, inventory) + p.obsolescence_rate * positive_part(inventory - p.buffer)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinCost {
    Newsvendor,
    Perishable { gamma: f64, buffer: f64 },
}

impl BuiltinCost {
    #[inline(always)]
    pub fn cost(&self, p: &NewsvendorParams, inventory: f64) -> f64 {
        match *self {
            BuiltinCost::Newsvendor => newsvendor_cost(p, inventory),
            BuiltinCost::Perishable { gamma, buffer } => perishable_cost(
                &PerishableParams {
                    base: *p,
                    obsolescence_rate: gamma,
                    buffer,
                },
                inventory,
            ),
        }
    }
}

/// Echelon-level holding and backorder rates come from the chain config.
pub trait CostFunction: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn compute(&self, p: &NewsvendorParams, inventory: f64) -> f64;

    fn builtin(&self) -> Option<BuiltinCost> {
        None
    }
}

#[derive(Debug, Clone, Default)]
pub struct Newsvendor;

impl CostFunction for Newsvendor {
    fn name(&self) -> &str {
        "newsvendor"
    }

    fn compute(&self, p: &NewsvendorParams, inventory: f64) -> f64 {
        newsvendor_cost(p, inventory)
    }

    fn builtin(&self) -> Option<BuiltinCost> {
        Some(BuiltinCost::Newsvendor)
    }
}

#[derive(Debug, Clone)]
pub struct Perishable {
    pub gamma: f64,
    pub buffer: f64,
}

impl Default for Perishable {
    fn default() -> Self {
        Perishable {
            gamma: 0.05,
            buffer: 50.0,
        }
    }
}

impl Perishable {
    pub fn new(gamma: f64, buffer: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("gamma", "must be a nonnegative number"));
        }
        if !(buffer.is_finite() && buffer >= 0.0) {
            return Err(Error::invalid("buffer", "must be a nonnegative number"));
        }
        Ok(Perishable { gamma, buffer })
    }
}

impl CostFunction for Perishable {
    fn name(&self) -> &str {
        "perishable"
    }

    fn compute(&self, p: &NewsvendorParams, inventory: f64) -> f64 {
        self.builtin().unwrap().cost(p, inventory)
    }

    fn builtin(&self) -> Option<BuiltinCost> {
        Some(BuiltinCost::Perishable {
            gamma: self.gamma,
            buffer: self.buffer,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTotals {
    pub per_path: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// TC_i = sum over echelons and periods, for a path-major `N x K x T` tensor.
pub fn total_cost(costs: &[f64], paths: usize, echelons: usize, horizon: usize) -> Result<CostTotals> {
    if costs.len() != paths * echelons * horizon {
        return Err(Error::ShapeMismatch(format!(
            "cost tensor has {} cells, expected {paths}x{echelons}x{horizon}",
            costs.len()
        )));
    }
    if paths == 0 {
        return Err(Error::Empty("cost tensor"));
    }
    let block = echelons * horizon;
    let per_path: Vec<f64> = costs
        .chunks(block.max(1))
        .take(paths)
        .map(|c| c.iter().fold(0.0, |a, &x| a + x))
        .collect();
    let mean = stats::mean(&per_path);
    let std = if paths > 1 { stats::sample_std(&per_path) } else { 0.0 };
    Ok(CostTotals { per_path, mean, std })
}
