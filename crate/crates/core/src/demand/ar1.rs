use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_horizon, clamp0, DemandGenerator, DemandSeries};
use crate::error::{Error, Result};
use crate::forecast::ForecastPair;
use crate::rng::stream;

/// AR(1) around `mu` with additive seasonality and a permanent step shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ar1Params {
    pub mu: f64,
    pub phi: f64,
    pub seasonal_amplitude: f64,
    pub season_length: usize,
    pub noise_std: f64,
    pub shock_magnitude: f64,
    pub shock_period: Option<usize>,
    /// D(0); `mu` when unset.
    pub initial: Option<f64>,
}

impl Default for Ar1Params {
    fn default() -> Self {
        Ar1Params {
            mu: 100.0,
            phi: 0.7,
            seasonal_amplitude: 10.0,
            season_length: 52,
            noise_std: 10.0,
            shock_magnitude: 0.3,
            shock_period: Some(104),
            initial: None,
        }
    }
}

impl Ar1Params {
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(self.phi >= 0.0 && self.phi < 1.0) {
            return Err(Error::invalid("phi", format!("{} is outside [0, 1)", self.phi)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std", "must be a nonnegative number"));
        }
        if self.season_length < 1 {
            return Err(Error::invalid("season_length", "must be at least 1"));
        }
        if !self.seasonal_amplitude.is_finite() || !self.shock_magnitude.is_finite() {
            return Err(Error::invalid("seasonal_amplitude/shock_magnitude", "must be finite"));
        }
        if let Some(x) = self.initial {
            if !x.is_finite() {
                return Err(Error::invalid("initial", "must be finite"));
            }
        }
        Ok(())
    }

    /// delta(t): `M * mu` from the shock period on.
    pub fn shock(&self, t: usize) -> f64 {
        match self.shock_period {
            Some(ts) if t >= ts => self.shock_magnitude * self.mu,
            _ => 0.0,
        }
    }
}

/// The recursion runs on unclamped values; only the output is clamped.
pub fn generate_ar1(p: &Ar1Params, horizon: usize, seed: u64) -> Result<DemandSeries> {
    p.validate()?;
    check_horizon(horizon)?;
    let mut rng = stream(seed);
    let mut prev = p.initial.unwrap_or(p.mu);
    let mut values = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let z: f64 = StandardNormal.sample(&mut rng);
        let season = p.seasonal_amplitude * (2.0 * PI * t as f64 / p.season_length as f64).sin();
        let x = p.mu + p.phi * (prev - p.mu) + season + p.shock(t) + p.noise_std * z;
        values.push(clamp0(x));
        prev = x;
    }
    Ok(DemandSeries { values, seed })
}

#[derive(Debug, Clone, Default)]
pub struct SemiconductorAr1 {
    pub params: Ar1Params,
}

impl SemiconductorAr1 {
    pub fn new(params: Ar1Params) -> Result<Self> {
        params.validate()?;
        Ok(SemiconductorAr1 { params })
    }
}

impl DemandGenerator for SemiconductorAr1 {
    fn name(&self) -> &str {
        "semiconductor_ar1"
    }

    fn generate(&self, horizon: usize, seed: u64) -> Result<DemandSeries> {
        generate_ar1(&self.params, horizon, seed)
    }

    fn prior(&self) -> Option<ForecastPair> {
        Some(ForecastPair::new(self.params.mu, self.params.noise_std))
    }
}
