use rand_distr::{Distribution, StandardNormal};

use super::{check_horizon, clamp0, DemandGenerator, DemandSeries};
use crate::error::{Error, Result};
use crate::forecast::{ForecastPair, SIGMA_FLOOR};
use crate::rng::stream;

pub fn generate_iid_normal(mu: f64, sigma: f64, horizon: usize, seed: u64) -> Result<DemandSeries> {
    IidNormal::new(mu, sigma)?.generate(horizon, seed)
}

#[derive(Debug, Clone)]
pub struct IidNormal {
    pub mu: f64,
    pub sigma: f64,
}

impl IidNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid("sigma", "must be a nonnegative number"));
        }
        Ok(IidNormal { mu, sigma })
    }
}

impl DemandGenerator for IidNormal {
    fn name(&self) -> &str {
        "iid_normal"
    }

    fn generate(&self, horizon: usize, seed: u64) -> Result<DemandSeries> {
        check_horizon(horizon)?;
        let mut rng = stream(seed);
        let values = (0..horizon)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                clamp0(self.mu + self.sigma * z)
            })
            .collect();
        Ok(DemandSeries { values, seed })
    }

    fn prior(&self) -> Option<ForecastPair> {
        Some(ForecastPair::new(self.mu, self.sigma))
    }
}

pub fn generate_beer_game(horizon: usize) -> Result<DemandSeries> {
    BeerGame::default().generate(horizon, 0)
}

/// Deterministic step: `low` before `step_period` (1-based), `high` after.
#[derive(Debug, Clone)]
pub struct BeerGame {
    pub low: f64,
    pub high: f64,
    pub step_period: usize,
}

impl Default for BeerGame {
    fn default() -> Self {
        BeerGame {
            low: 4.0,
            high: 8.0,
            step_period: 5,
        }
    }
}

impl BeerGame {
    pub fn new(low: f64, high: f64, step_period: usize) -> Result<Self> {
        if !(low >= 0.0 && high >= 0.0 && low.is_finite() && high.is_finite()) {
            return Err(Error::invalid("low/high", "must be nonnegative numbers"));
        }
        Ok(BeerGame {
            low,
            high,
            step_period,
        })
    }
}

impl DemandGenerator for BeerGame {
    fn name(&self) -> &str {
        "beer_game"
    }

    fn generate(&self, horizon: usize, seed: u64) -> Result<DemandSeries> {
        check_horizon(horizon)?;
        let values = (1..=horizon)
            .map(|t| if t < self.step_period { self.low } else { self.high })
            .collect();
        Ok(DemandSeries { values, seed })
    }

    fn prior(&self) -> Option<ForecastPair> {
        Some(ForecastPair::new(self.low, SIGMA_FLOOR))
    }
}
