use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use super::{check_horizon, clamp0, DemandGenerator, DemandSeries};
use crate::error::{Error, Result};
use crate::forecast::ForecastPair;
use crate::rng::stream;
use crate::stats;

const BUNDLED: &str = include_str!("../../data/regime_switching_60.csv");

/// Tile `source` cyclically to `horizon` periods and scale each value by
/// `1 + N(0, noise_fraction^2)`, clamping at zero.
pub fn replay(source: &[f64], horizon: usize, noise_fraction: f64, seed: u64) -> Result<DemandSeries> {
    Replay::new(source.to_vec(), noise_fraction)?.generate(horizon, seed)
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub source: Vec<f64>,
    pub noise_fraction: f64,
}

impl Replay {
    pub fn new(source: Vec<f64>, noise_fraction: f64) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::Empty("replay source"));
        }
        if source.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("source", "values must be nonnegative numbers"));
        }
        if !(noise_fraction.is_finite() && noise_fraction >= 0.0) {
            return Err(Error::invalid("noise_fraction", "must be a nonnegative number"));
        }
        Ok(Replay {
            source,
            noise_fraction,
        })
    }

    /// The bundled 60-period synthetic regime-switching series.
    pub fn bundled(noise_fraction: f64) -> Result<Self> {
        Replay::new(bundled_regime_switching(), noise_fraction)
    }
}

impl DemandGenerator for Replay {
    fn name(&self) -> &str {
        "replay"
    }

    fn generate(&self, horizon: usize, seed: u64) -> Result<DemandSeries> {
        check_horizon(horizon)?;
        let mut rng = stream(seed);
        let n = self.source.len();
        let values = (0..horizon)
            .map(|t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                clamp0(self.source[t % n] * (1.0 + self.noise_fraction * z))
            })
            .collect();
        Ok(DemandSeries { values, seed })
    }

    fn prior(&self) -> Option<ForecastPair> {
        let std = if self.source.len() > 1 {
            stats::sample_std(&self.source)
        } else {
            0.0
        };
        Some(ForecastPair::new(stats::mean(&self.source), std))
    }
}

/// Parse replay CSV text: a `value` column, optionally alongside `period`.
pub fn parse_replay_csv(text: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse("replay csv", e))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::parse("replay csv", "missing `value` column"))?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse("replay csv", e))?;
        let raw = rec.get(col).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::parse("replay csv", format!("row {}: `{raw}` is not a number", line + 1)))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::parse("replay csv", format!("row {}: value must be nonnegative", line + 1)));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Empty("replay source"));
    }
    Ok(out)
}

pub fn load_replay_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_replay_csv(&text)
}

pub fn bundled_regime_switching() -> Vec<f64> {
    parse_replay_csv(BUNDLED).expect("bundled series is well formed")
}
