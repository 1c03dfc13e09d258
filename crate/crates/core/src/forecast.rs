//! Demand forecasters producing a (mean, std) pair per period.
//!
//! Batch forecasts are strictly causal: entry `(i, t)` only sees
//! `demand[i][..t]`. Entry `(i, 0)` is the warmup prior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::DemandBatch;
use crate::error::{Error, Result};
use crate::stats;

/// Lower bound on every reported standard deviation, in demand units.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Window of received orders used by upstream echelons.
pub const UPSTREAM_WINDOW: usize = 8;

#[inline]
pub fn floor_std(s: f64) -> f64 {
    if s > SIGMA_FLOOR {
        s
    } else {
        SIGMA_FLOOR
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastPair {
    pub mean: f64,
    pub std: f64,
}

impl ForecastPair {
    /// Floors `std` at [`SIGMA_FLOOR`].
    pub fn new(mean: f64, std: f64) -> Self {
        ForecastPair {
            mean,
            std: floor_std(std),
        }
    }
}

/// Mean and floored n-1 std of a nonempty sample.
fn sample_pair(xs: &[f64]) -> ForecastPair {
    let mean = stats::mean(xs);
    let std = if xs.len() < 2 {
        SIGMA_FLOOR
    } else {
        stats::sample_variance(xs).sqrt()
    };
    ForecastPair::new(mean, std)
}

fn nonempty(history: &[f64]) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Empty("forecast history"));
    }
    Ok(())
}

pub fn naive_forecast(history: &[f64]) -> Result<ForecastPair> {
    nonempty(history)?;
    Ok(sample_pair(history))
}

pub fn moving_average_forecast(history: &[f64], window: usize) -> Result<ForecastPair> {
    if window < 2 {
        return Err(Error::invalid("window", format!("{window} is below 2")));
    }
    nonempty(history)?;
    let start = history.len().saturating_sub(window);
    Ok(sample_pair(&history[start..]))
}

/// Mean-absolute-deviation to std factor for the normal distribution.
const MAD_TO_STD: f64 = 1.253_314_137_315_500_3; // sqrt(pi / 2)

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} is outside (0, 1]")));
    }
    Ok(())
}

/// One step of simple exponential smoothing on (level, smoothed |error|).
#[inline]
fn smooth_step(alpha: f64, level: f64, mad: f64, x: f64) -> (f64, f64) {
    let err = x - level;
    let mad = mad + alpha * (err.abs() - mad);
    let level = level + alpha * err;
    (level, mad)
}

pub fn exp_smoothing_forecast(history: &[f64], alpha: f64) -> Result<ForecastPair> {
    check_alpha(alpha)?;
    nonempty(history)?;
    let (mut level, mut mad) = (history[0], 0.0);
    for &x in &history[1..] {
        (level, mad) = smooth_step(alpha, level, mad, x);
    }
    Ok(ForecastPair::new(level, MAD_TO_STD * mad))
}

/// Rolling statistics over the last `window` received orders, or `prior`
/// before anything has been received.
pub fn rolling_upstream_estimate(recent: &[f64], window: usize, prior: ForecastPair) -> ForecastPair {
    if recent.is_empty() || window == 0 {
        return prior;
    }
    let start = recent.len().saturating_sub(window);
    sample_pair(&recent[start..])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastBatch {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub paths: usize,
    pub horizon: usize,
}

impl ForecastBatch {
    pub fn constant(paths: usize, horizon: usize, pair: ForecastPair) -> Self {
        ForecastBatch {
            means: vec![pair.mean; paths * horizon],
            stds: vec![pair.std; paths * horizon],
            paths,
            horizon,
        }
    }

    pub fn from_rows(means: &[Vec<f64>], stds: &[Vec<f64>]) -> Result<Self> {
        let horizon = means.first().map(|r| r.len()).unwrap_or(0);
        if means.len() != stds.len()
            || means.iter().chain(stds).any(|r| r.len() != horizon)
        {
            return Err(Error::ShapeMismatch("forecast mean/std rows disagree".into()));
        }
        Ok(ForecastBatch {
            means: means.concat(),
            stds: stds.concat(),
            paths: means.len(),
            horizon,
        })
    }

    pub fn mean_row(&self, i: usize) -> &[f64] {
        &self.means[i * self.horizon..(i + 1) * self.horizon]
    }

    pub fn std_row(&self, i: usize) -> &[f64] {
        &self.stds[i * self.horizon..(i + 1) * self.horizon]
    }

    pub fn prior(&self, i: usize) -> ForecastPair {
        ForecastPair {
            mean: self.means[i * self.horizon],
            std: self.stds[i * self.horizon],
        }
    }
}

pub trait Forecaster: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    /// Forecast for the period following `history`.
    fn forecast(&self, history: &[f64]) -> Result<ForecastPair>;

    /// Causal forecasts for one row: slot `t` sees `row[..t]`, slot 0 holds
    /// the prior (or `(row[0], SIGMA_FLOOR)` when there is none).
    fn forecast_path(
        &self,
        row: &[f64],
        prior: Option<ForecastPair>,
        means: &mut [f64],
        stds: &mut [f64],
    ) -> Result<()> {
        if row.is_empty() {
            return Ok(());
        }
        let p0 = prior.unwrap_or(ForecastPair::new(row[0], SIGMA_FLOOR));
        means[0] = p0.mean;
        stds[0] = p0.std;
        for t in 1..row.len() {
            let f = self.forecast(&row[..t])?;
            means[t] = f.mean;
            stds[t] = f.std;
        }
        Ok(())
    }

    fn generate_forecasts(&self, demand: &DemandBatch, prior: Option<ForecastPair>) -> Result<ForecastBatch> {
        let t = demand.horizon;
        if demand.paths == 0 || t == 0 {
            return Err(Error::Empty("demand batch"));
        }
        let mut means = vec![0.0; demand.paths * t];
        let mut stds = vec![0.0; demand.paths * t];
        means
            .par_chunks_mut(t)
            .zip(stds.par_chunks_mut(t))
            .enumerate()
            .try_for_each(|(i, (m, s))| self.forecast_path(demand.row(i), prior, m, s))?;
        Ok(ForecastBatch {
            means,
            stds,
            paths: demand.paths,
            horizon: t,
        })
    }
}

/// Expanding-window sample mean and std.
#[derive(Debug, Clone, Default)]
pub struct Naive;

impl Forecaster for Naive {
    fn name(&self) -> &str {
        "naive"
    }

    fn forecast(&self, history: &[f64]) -> Result<ForecastPair> {
        naive_forecast(history)
    }
}

#[derive(Debug, Clone)]
pub struct MovingAverage {
    pub window: usize,
}

impl MovingAverage {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::invalid("window", format!("{window} is below 2")));
        }
        Ok(MovingAverage { window })
    }
}

impl Forecaster for MovingAverage {
    fn name(&self) -> &str {
        "moving_average"
    }

    fn forecast(&self, history: &[f64]) -> Result<ForecastPair> {
        moving_average_forecast(history, self.window)
    }
}

#[derive(Debug, Clone)]
pub struct ExpSmoothing {
    pub alpha: f64,
}

impl ExpSmoothing {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(ExpSmoothing { alpha })
    }
}

impl Forecaster for ExpSmoothing {
    fn name(&self) -> &str {
        "exponential_smoothing"
    }

    fn forecast(&self, history: &[f64]) -> Result<ForecastPair> {
        exp_smoothing_forecast(history, self.alpha)
    }

    // Same recursion as `forecast`, carried forward instead of restarted.
    fn forecast_path(
        &self,
        row: &[f64],
        prior: Option<ForecastPair>,
        means: &mut [f64],
        stds: &mut [f64],
    ) -> Result<()> {
        if row.is_empty() {
            return Ok(());
        }
        let p0 = prior.unwrap_or(ForecastPair::new(row[0], SIGMA_FLOOR));
        means[0] = p0.mean;
        stds[0] = p0.std;
        let (mut level, mut mad) = (row[0], 0.0);
        for t in 1..row.len() {
            if t > 1 {
                (level, mad) = smooth_step(self.alpha, level, mad, row[t - 1]);
            }
            let f = ForecastPair::new(level, MAD_TO_STD * mad);
            means[t] = f.mean;
            stds[t] = f.std;
        }
        Ok(())
    }
}

/// Leaky full-sample forecast: one (mean, std) for every entry.
///
/// On a batch the statistics pool all `N x T` values; on a single row they
/// use that row only. Not causal; for reproducing fixed-forecast protocols.
#[derive(Debug, Clone, Default)]
pub struct GlobalConstant;

impl Forecaster for GlobalConstant {
    fn name(&self) -> &str {
        "global_constant"
    }

    fn forecast(&self, history: &[f64]) -> Result<ForecastPair> {
        naive_forecast(history)
    }

    fn forecast_path(
        &self,
        row: &[f64],
        _prior: Option<ForecastPair>,
        means: &mut [f64],
        stds: &mut [f64],
    ) -> Result<()> {
        let f = naive_forecast(row)?;
        means.fill(f.mean);
        stds.fill(f.std);
        Ok(())
    }

    fn generate_forecasts(&self, demand: &DemandBatch, _prior: Option<ForecastPair>) -> Result<ForecastBatch> {
        let f = naive_forecast(&demand.values)?;
        Ok(ForecastBatch::constant(demand.paths, demand.horizon, f))
    }
}

/// Registry hook for a neural probabilistic forecaster. No model ships.
#[derive(Debug, Clone, Default)]
pub struct DeepArHook;

impl Forecaster for DeepArHook {
    fn name(&self) -> &str {
        "deepar"
    }

    fn forecast(&self, _history: &[f64]) -> Result<ForecastPair> {
        Err(Error::Unavailable("forecaster `deepar`".into()))
    }

    fn generate_forecasts(&self, _demand: &DemandBatch, _prior: Option<ForecastPair>) -> Result<ForecastBatch> {
        Err(Error::Unavailable("forecaster `deepar`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{generate_batch, DemandGenerator, IidNormal};
    use proptest::prelude::*;

    #[test]
    fn naive_examples() {
        let f = naive_forecast(&[100.0, 100.0, 100.0]).unwrap();
        assert_eq!((f.mean, f.std), (100.0, SIGMA_FLOOR));
        let f = naive_forecast(&[90.0, 110.0]).unwrap();
        assert_eq!(f.mean, 100.0);
        assert!((f.std - 200f64.sqrt()).abs() < 1e-12);
        assert_eq!(naive_forecast(&[5.0]).unwrap(), ForecastPair { mean: 5.0, std: SIGMA_FLOOR });
        assert!(naive_forecast(&[]).is_err());
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average_forecast(&[1.0, 2.0, 3.0, 4.0], 3).unwrap().mean, 3.0);
        assert_eq!(moving_average_forecast(&[1.0, 2.0], 5).unwrap().mean, 1.5);
        assert_eq!(moving_average_forecast(&[7.0; 6], 4).unwrap().std, SIGMA_FLOOR);
        assert!(moving_average_forecast(&[1.0], 1).is_err());
    }

    #[test]
    fn exp_smoothing_examples() {
        assert_eq!(exp_smoothing_forecast(&[3.0, 9.0, 4.0], 1.0).unwrap().mean, 4.0);
        let f = exp_smoothing_forecast(&[100.0, 200.0], 0.5).unwrap();
        assert_eq!(f.mean, 150.0);
        // d_2 = 0.5 * |200 - 100|
        assert!((f.std - MAD_TO_STD * 50.0).abs() < 1e-12);
        let c = exp_smoothing_forecast(&[12.0; 9], 0.3).unwrap();
        assert_eq!((c.mean, c.std), (12.0, SIGMA_FLOOR));
        assert!(exp_smoothing_forecast(&[1.0], 0.0).is_err());
        assert!(exp_smoothing_forecast(&[1.0], 1.5).is_err());
    }

    #[test]
    fn upstream_estimate() {
        let prior = ForecastPair::new(100.0, 10.0);
        assert_eq!(rolling_upstream_estimate(&[], 8, prior), prior);
        let four = rolling_upstream_estimate(&[10.0; 4], 8, prior);
        assert_eq!((four.mean, four.std), (10.0, SIGMA_FLOOR));
        let hist: Vec<f64> = (0..20).map(|x| (x * x) as f64).collect();
        assert_eq!(
            rolling_upstream_estimate(&hist, 8, prior),
            moving_average_forecast(&hist, 8).unwrap()
        );
    }

    #[test]
    fn batch_forecasts_are_causal() {
        let gen = IidNormal::new(100.0, 10.0).unwrap();
        let mut d = generate_batch(&gen, 30, 3, 5).unwrap();
        let ma = MovingAverage::new(5).unwrap();
        let before = ma.generate_forecasts(&d, gen.prior()).unwrap();
        let t = 17;
        d.values[d.horizon + t] += 1000.0;
        let after = ma.generate_forecasts(&d, gen.prior()).unwrap();
        assert_eq!(&before.mean_row(1)[..=t], &after.mean_row(1)[..=t]);
        assert_ne!(before.mean_row(1)[t + 1], after.mean_row(1)[t + 1]);
        assert_eq!(before.mean_row(0), after.mean_row(0));
        assert_eq!(before.prior(1), ForecastPair::new(100.0, 10.0));
    }

    #[test]
    fn naive_on_constant_demand() {
        let d = DemandBatch::from_rows(&[vec![100.0; 12]], 0).unwrap();
        let fc = Naive.generate_forecasts(&d, None).unwrap();
        assert!(fc.means.iter().all(|&m| m == 100.0));
        assert!(fc.stds.iter().all(|&s| s == SIGMA_FLOOR));
    }

    #[test]
    fn moving_average_unbiased() {
        let gen = IidNormal::new(100.0, 10.0).unwrap();
        let d = generate_batch(&gen, 60, 1000, 77).unwrap();
        let fc = MovingAverage::new(10).unwrap().generate_forecasts(&d, gen.prior()).unwrap();
        let errs: Vec<f64> = d.values.iter().zip(&fc.means).map(|(x, m)| x - m).collect();
        assert!(stats::mean(&errs).abs() < 0.15);
    }

    #[test]
    fn exp_smoothing_path_matches_recomputation() {
        let gen = IidNormal::new(50.0, 5.0).unwrap();
        let d = generate_batch(&gen, 40, 2, 1).unwrap();
        let es = ExpSmoothing::new(0.3).unwrap();
        let fc = es.generate_forecasts(&d, None).unwrap();
        for t in 1..40 {
            let f = es.forecast(&d.row(1)[..t]).unwrap();
            assert_eq!((fc.mean_row(1)[t], fc.std_row(1)[t]), (f.mean, f.std));
        }
        assert_eq!(fc.mean_row(1)[0], d.row(1)[0]);
    }

    #[test]
    fn global_constant_pools_all_values() {
        let d = DemandBatch::from_rows(&[vec![1.0, 3.0], vec![5.0, 7.0]], 0).unwrap();
        let fc = GlobalConstant.generate_forecasts(&d, None).unwrap();
        assert!(fc.means.iter().all(|&m| m == 4.0));
        assert!(DeepArHook.generate_forecasts(&d, None).is_err());
    }

    proptest! {
        #[test]
        fn stds_respect_floor(xs in prop::collection::vec(-1e3f64..1e3, 1..40), w in 2usize..12, a in 0.01f64..1.0) {
            prop_assert!(naive_forecast(&xs).unwrap().std >= SIGMA_FLOOR);
            prop_assert!(moving_average_forecast(&xs, w).unwrap().std >= SIGMA_FLOOR);
            prop_assert!(exp_smoothing_forecast(&xs, a).unwrap().std >= SIGMA_FLOOR);
        }

        #[test]
        fn wide_window_equals_naive(xs in prop::collection::vec(0.0f64..500.0, 1..30)) {
            let w = xs.len().max(2);
            prop_assert_eq!(moving_average_forecast(&xs, w).unwrap(), naive_forecast(&xs).unwrap());
        }
    }
}
