//! End-customer demand generators.
//!
//! Every generator is a pure function of `(params, horizon, seed)`. Values
//! are clamped at zero after noise is applied.

mod ar1;
mod arma;
mod replay;
mod simple;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ar1::{generate_ar1, Ar1Params, SemiconductorAr1};
pub use arma::{check_stationary, generate_arma, Arma, ArmaParams};
pub use replay::{bundled_regime_switching, load_replay_csv, parse_replay_csv, replay, Replay};
pub use simple::{generate_beer_game, generate_iid_normal, BeerGame, IidNormal};

use crate::error::{Error, Result};
use crate::forecast::ForecastPair;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSeries {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl DemandSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `N x T` demand realisations, stored row-major (`i * T + t`).
#[derive(Debug, Clone, PartialEq)]
pub struct DemandBatch {
    pub values: Vec<f64>,
    pub paths: usize,
    pub horizon: usize,
    pub base_seed: u64,
}

impl DemandBatch {
    pub fn from_rows(rows: &[Vec<f64>], base_seed: u64) -> Result<Self> {
        let horizon = rows.first().map(|r| r.len()).ok_or(Error::Empty("demand rows"))?;
        if horizon == 0 {
            return Err(Error::Empty("demand row"));
        }
        let mut values = Vec::with_capacity(rows.len() * horizon);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != horizon {
                return Err(Error::ShapeMismatch(format!(
                    "demand row {i} has {} periods, expected {horizon}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Ok(DemandBatch {
            values,
            paths: rows.len(),
            horizon,
            base_seed,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.horizon..(i + 1) * self.horizon]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.horizon)
    }

    /// SHA-256 over the little-endian bytes of every value, hex encoded.
    pub fn digest(&self) -> String {
        digest_values(self.paths, self.horizon, &self.values)
    }
}

/// The digest used by [`DemandBatch::digest`], for a bare row-major buffer.
pub fn digest_values(paths: usize, horizon: usize, values: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((paths as u64).to_le_bytes());
    h.update((horizon as u64).to_le_bytes());
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub trait DemandGenerator: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn generate(&self, horizon: usize, seed: u64) -> Result<DemandSeries>;

    /// Long-run mean and noise std, when the process defines them.
    fn prior(&self) -> Option<ForecastPair> {
        None
    }
}

/// Row `i` is `gen.generate(horizon, derive_seed(base_seed, i))`.
pub fn generate_batch(
    gen: &dyn DemandGenerator,
    horizon: usize,
    paths: usize,
    base_seed: u64,
) -> Result<DemandBatch> {
    if paths == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    if horizon == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    let mut values = vec![0.0; paths * horizon];
    values
        .par_chunks_mut(horizon)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let s = gen.generate(horizon, derive_seed(base_seed, i as u64))?;
            row.copy_from_slice(&s.values);
            Ok(())
        })?;
    Ok(DemandBatch {
        values,
        paths,
        horizon,
        base_seed,
    })
}

pub(crate) fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp0(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
