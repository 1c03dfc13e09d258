use std::io::Write;

use crate::config::ChainConfig;
use crate::error::{Error, Result};

/// Trajectories of `N` paths through a `K`-echelon chain over `T` periods.
///
/// Tensors are path-major: cell `(i, k, t)` lives at `(i * K + k) * T + t`.
/// Echelon indices are 0-based here; reports label them E1..EK.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub paths: usize,
    pub echelons: usize,
    pub horizon: usize,
    pub orders: Vec<f64>,
    pub inventory: Vec<f64>,
    pub costs: Vec<f64>,
    /// Customer demand, `i * T + t`.
    pub demand: Vec<f64>,
    pub config: ChainConfig,
    pub seed: u64,
    pub burn_in: usize,
}

impl SimulationResult {
    #[inline]
    fn span(&self, i: usize, k: usize) -> std::ops::Range<usize> {
        let start = (i * self.echelons + k) * self.horizon;
        start..start + self.horizon
    }

    pub fn order_series(&self, i: usize, k: usize) -> &[f64] {
        &self.orders[self.span(i, k)]
    }

    pub fn inventory_series(&self, i: usize, k: usize) -> &[f64] {
        &self.inventory[self.span(i, k)]
    }

    pub fn cost_series(&self, i: usize, k: usize) -> &[f64] {
        &self.costs[self.span(i, k)]
    }

    pub fn demand_series(&self, i: usize) -> &[f64] {
        &self.demand[i * self.horizon..(i + 1) * self.horizon]
    }

    /// Demand faced by echelon `k`: customer demand for `k = 0`, the
    /// downstream neighbour's orders otherwise.
    pub fn demand_seen(&self, i: usize, k: usize) -> &[f64] {
        if k == 0 {
            self.demand_series(i)
        } else {
            self.order_series(i, k - 1)
        }
    }

    /// First period included in metrics.
    pub fn metric_start(&self) -> usize {
        self.burn_in.min(self.horizon)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn check_echelon(&self, k: usize) -> Result<()> {
        if k >= self.echelons {
            return Err(Error::invalid(
                "echelon",
                format!("E{} does not exist in a {}-echelon chain", k + 1, self.echelons),
            ));
        }
        Ok(())
    }

    /// Long-format CSV: `path,echelon,period,demand,order,inventory,cost`,
    /// with 1-based echelon and period labels.
    pub fn write_trajectories_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::parse("trajectory csv", e);
        w.write_record(["path", "echelon", "period", "demand", "order", "inventory", "cost"])
            .map_err(err)?;
        for i in 0..self.paths {
            for k in 0..self.echelons {
                let (d, o, inv, c) = (
                    self.demand_seen(i, k),
                    self.order_series(i, k),
                    self.inventory_series(i, k),
                    self.cost_series(i, k),
                );
                for t in 0..self.horizon {
                    w.write_record([
                        i.to_string(),
                        (k + 1).to_string(),
                        (t + 1).to_string(),
                        d[t].to_string(),
                        o[t].to_string(),
                        inv[t].to_string(),
                        c[t].to_string(),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::parse("trajectory csv", e))?;
        Ok(())
    }
}
