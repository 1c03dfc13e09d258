use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_horizon, clamp0, DemandGenerator, DemandSeries};
use crate::error::{Error, Result};
use crate::forecast::ForecastPair;
use crate::rng::stream;

/// Periods simulated and discarded before the first reported value.
const BURN_IN: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmaParams {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

impl Default for ArmaParams {
    fn default() -> Self {
        ArmaParams {
            ar: vec![0.7],
            ma: vec![],
            mu: 100.0,
            sigma: 10.0,
        }
    }
}

/// Step-down (Schur-Cohn) test: the AR part of
/// `x_t = sum_i ar[i] x_{t-1-i} + e_t` is stationary iff every reflection
/// coefficient has modulus below one.
pub fn check_stationary(ar: &[f64]) -> Result<()> {
    let mut a = ar.to_vec();
    while let Some(&kappa) = a.last() {
        let m = a.len();
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return Err(Error::NonStationary {
                order: m,
                coefficient: kappa,
            });
        }
        let denom = 1.0 - kappa * kappa;
        a = (0..m - 1)
            .map(|i| (a[i] + kappa * a[m - 2 - i]) / denom)
            .collect();
    }
    Ok(())
}

impl ArmaParams {
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid("sigma", "must be a nonnegative number"));
        }
        if self.ma.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("ma", "coefficients must be finite"));
        }
        check_stationary(&self.ar)
    }
}

pub fn generate_arma(p: &ArmaParams, horizon: usize, seed: u64) -> Result<DemandSeries> {
    p.validate()?;
    check_horizon(horizon)?;
    let mut rng = stream(seed);
    let total = BURN_IN + horizon;
    // deviations from mu and innovations, newest last
    let mut dev = vec![0.0; total];
    let mut eps = vec![0.0; total];
    for t in 0..total {
        let z: f64 = StandardNormal.sample(&mut rng);
        let e = p.sigma * z;
        let mut x = e;
        for (i, &phi) in p.ar.iter().enumerate() {
            if t > i {
                x += phi * dev[t - 1 - i];
            }
        }
        for (j, &theta) in p.ma.iter().enumerate() {
            if t > j {
                x += theta * eps[t - 1 - j];
            }
        }
        dev[t] = x;
        eps[t] = e;
    }
    let values = dev[BURN_IN..].iter().map(|&d| clamp0(p.mu + d)).collect();
    Ok(DemandSeries { values, seed })
}

#[derive(Debug, Clone)]
pub struct Arma {
    pub params: ArmaParams,
}

impl Arma {
    pub fn new(params: ArmaParams) -> Result<Self> {
        params.validate()?;
        Ok(Arma { params })
    }
}

impl DemandGenerator for Arma {
    fn name(&self) -> &str {
        "arma"
    }

    fn generate(&self, horizon: usize, seed: u64) -> Result<DemandSeries> {
        generate_arma(&self.params, horizon, seed)
    }

    fn prior(&self) -> Option<ForecastPair> {
        Some(ForecastPair::new(self.params.mu, self.params.sigma))
    }
}
