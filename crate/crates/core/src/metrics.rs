//! Bullwhip and cost metrics over a [`SimulationResult`].
//!
//! Every metric is computed per path first and then summarised. Echelon
//! arguments are 0-based; metrics skip the first `result.burn_in` periods.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::SimulationResult;
use crate::error::{Error, Result};
use crate::stats::{self, Summary};

/// Sample variance that is exactly zero for a constant series.
pub fn series_variance(xs: &[f64]) -> f64 {
    match xs.first() {
        Some(&x0) if xs.iter().all(|&x| x == x0) => {
            if xs.len() < 2 {
                f64::NAN
            } else {
                0.0
            }
        }
        _ => stats::sample_variance(xs),
    }
}

/// `Var(num) / Var(den)`; a zero denominator gives 1 when the numerator is
/// also zero and +inf otherwise.
pub fn variance_ratio(num: &[f64], den: &[f64]) -> f64 {
    ratio_of(series_variance(num), series_variance(den))
}

fn ratio_of(vn: f64, vd: f64) -> f64 {
    if vd == 0.0 {
        if vn == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        vn / vd
    }
}

/// Where a metric value applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    /// 0-based echelon index; displayed as `E{k+1}`.
    Echelon(usize),
    Chain,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Echelon(k) => write!(f, "E{}", k + 1),
            Scope::Chain => f.write_str("chain"),
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "chain" {
            return Ok(Scope::Chain);
        }
        match s.strip_prefix('E').and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if n >= 1 => Ok(Scope::Echelon(n - 1)),
            _ => Err(Error::parse("scope", format!("`{s}` is neither `chain` nor E1, E2, ...",))),
        }
    }
}

/// Summary statistic used when a metric is reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Mean,
    Median,
    Std,
    Cv,
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            "std" => Ok(Statistic::Std),
            "cv" => Ok(Statistic::Cv),
            _ => Err(Error::invalid("stat", format!("`{s}`; expected mean, median, std or cv"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric_name: String,
    pub scope: Scope,
    pub per_path: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub cv: f64,
    /// Paths whose denominator variance was zero.
    pub degenerate_paths: usize,
}

impl MetricValue {
    pub fn new(name: &str, scope: Scope, per_path: Vec<f64>, degenerate_paths: usize) -> Self {
        let s = Summary::of(&per_path);
        MetricValue {
            metric_name: name.to_string(),
            scope,
            per_path,
            mean: s.mean,
            median: s.median,
            std: s.std,
            cv: s.cv,
            degenerate_paths,
        }
    }

    pub fn stat(&self, which: Statistic) -> f64 {
        match which {
            Statistic::Mean => self.mean,
            Statistic::Median => self.median,
            Statistic::Std => self.std,
            Statistic::Cv => self.cv,
        }
    }
}

fn window(result: &SimulationResult, k: usize) -> Result<std::ops::Range<usize>> {
    result.check_echelon(k)?;
    let start = result.metric_start();
    if result.horizon - start < 2 {
        return Err(Error::invalid(
            "T",
            format!(
                "variance metrics need at least 2 periods after burn-in, have {}",
                result.horizon - start
            ),
        ));
    }
    Ok(start..result.horizon)
}

/// Per-path variance of a series selected by `f`.
fn path_variances<'a, F>(result: &'a SimulationResult, f: F) -> Vec<f64>
where
    F: Fn(usize) -> &'a [f64] + Sync,
{
    let w = result.metric_start()..result.horizon;
    (0..result.paths)
        .into_par_iter()
        .map(|i| series_variance(&f(i)[w.clone()]))
        .collect()
}

fn ratios(name: &str, scope: Scope, num: &[f64], den: &[f64]) -> MetricValue {
    let degenerate = den.iter().filter(|&&d| d == 0.0).count();
    let per_path = num.iter().zip(den).map(|(&n, &d)| ratio_of(n, d)).collect();
    MetricValue::new(name, scope, per_path, degenerate)
}

/// `Var(O_k) / Var(D_k)` per path.
pub fn bwr(result: &SimulationResult, k: usize) -> Result<MetricValue> {
    window(result, k)?;
    let num = path_variances(result, |i| result.order_series(i, k));
    let den = path_variances(result, |i| result.demand_seen(i, k));
    Ok(ratios("bwr", Scope::Echelon(k), &num, &den))
}

/// Product of the per-echelon ratios through echelon `k`.
///
/// Cross-checked against the telescoped form `Var(O_k) / Var(D)` on paths
/// where every factor is finite and nonzero.
pub fn cumulative_bwr(result: &SimulationResult, k: usize) -> Result<MetricValue> {
    window(result, k)?;
    let mut product = vec![1.0; result.paths];
    let mut degenerate = 0;
    for j in 0..=k {
        let b = bwr(result, j)?;
        degenerate += b.degenerate_paths;
        for (p, f) in product.iter_mut().zip(&b.per_path) {
            *p *= f;
        }
    }
    let direct = telescoped_bwr(result, k)?;
    for (i, (&p, &d)) in product.iter().zip(&direct).enumerate() {
        if p.is_finite() && p > 0.0 && d.is_finite() && d > 0.0 && ((p - d) / d).abs() > 1e-9 {
            log::warn!("path {i}: cumulative BWR {p} disagrees with Var(O)/Var(D) = {d}");
        }
    }
    Ok(MetricValue::new("cum_bwr", Scope::Echelon(k), product, degenerate))
}

/// `Var(O_k) / Var(D)` per path.
pub fn telescoped_bwr(result: &SimulationResult, k: usize) -> Result<Vec<f64>> {
    window(result, k)?;
    let num = path_variances(result, |i| result.order_series(i, k));
    let den = path_variances(result, |i| result.demand_series(i));
    Ok(num.iter().zip(&den).map(|(&n, &d)| ratio_of(n, d)).collect())
}

/// `Var(I_k) / Var(D_k)` per path.
pub fn nsamp(result: &SimulationResult, k: usize) -> Result<MetricValue> {
    window(result, k)?;
    let num = path_variances(result, |i| result.inventory_series(i, k));
    let den = path_variances(result, |i| result.demand_seen(i, k));
    Ok(ratios("nsamp", Scope::Echelon(k), &num, &den))
}

/// Fraction of periods with nonnegative net inventory.
pub fn fill_rate(result: &SimulationResult, k: usize) -> Result<MetricValue> {
    result.check_echelon(k)?;
    let start = result.metric_start();
    let n = result.horizon - start;
    if n == 0 {
        return Err(Error::invalid("burn_in", "leaves no periods to evaluate"));
    }
    let per_path = (0..result.paths)
        .map(|i| {
            let ok = result.inventory_series(i, k)[start..].iter().filter(|&&x| x >= 0.0).count();
            ok as f64 / n as f64
        })
        .collect();
    Ok(MetricValue::new("fill_rate", Scope::Echelon(k), per_path, 0))
}

/// Cost summed over periods and over echelons `0..=k`; at the last echelon
/// this is the chain total.
pub fn total_cost(result: &SimulationResult, k: usize) -> Result<MetricValue> {
    result.check_echelon(k)?;
    let start = result.metric_start();
    let per_path = (0..result.paths)
        .map(|i| {
            (0..=k).fold(0.0, |acc, j| {
                acc + result.cost_series(i, j)[start..].iter().fold(0.0, |a, &c| a + c)
            })
        })
        .collect();
    Ok(MetricValue::new("tc", Scope::Echelon(k), per_path, 0))
}

/// Lower bound on the OUT bullwhip ratio with a `p`-period moving average:
/// `1 + 2(L+1)/p + 2(L+1)^2/p^2`.
pub fn chen_lower_bound(lead_time: usize, p: usize) -> Result<f64> {
    if p < 1 {
        return Err(Error::invalid("p", "window must be at least 1"));
    }
    let r = (lead_time + 1) as f64 / p as f64;
    Ok(1.0 + 2.0 * r + 2.0 * r * r)
}

pub trait Metric: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn compute(&self, result: &SimulationResult, k: usize) -> Result<MetricValue>;
}

macro_rules! metric {
    ($ty:ident, $name:literal, $f:path) => {
        #[derive(Debug, Clone, Default)]
        pub struct $ty;

        impl Metric for $ty {
            fn name(&self) -> &str {
                $name
            }

            fn compute(&self, result: &SimulationResult, k: usize) -> Result<MetricValue> {
                $f(result, k)
            }
        }
    };
}

metric!(Bwr, "bwr", bwr);
metric!(CumBwr, "cum_bwr", cumulative_bwr);
metric!(NsAmp, "nsamp", nsamp);
metric!(FillRate, "fill_rate", fill_rate);
metric!(TotalCost, "tc", total_cost);

/// The bound for the echelon's own lead time, repeated for every path.
#[derive(Debug, Clone)]
pub struct ChenLowerBound {
    pub window: usize,
}

impl Default for ChenLowerBound {
    fn default() -> Self {
        ChenLowerBound { window: 10 }
    }
}

impl ChenLowerBound {
    pub fn new(window: usize) -> Result<Self> {
        chen_lower_bound(0, window)?;
        Ok(ChenLowerBound { window })
    }
}

impl Metric for ChenLowerBound {
    fn name(&self) -> &str {
        "chen_lower_bound"
    }

    fn compute(&self, result: &SimulationResult, k: usize) -> Result<MetricValue> {
        result.check_echelon(k)?;
        let b = chen_lower_bound(result.config.echelons[k].lead_time, self.window)?;
        Ok(MetricValue::new(self.name(), Scope::Echelon(k), vec![b; result.paths], 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ChainConfig, EchelonConfig};

    fn result(demand: Vec<Vec<f64>>, orders: Vec<Vec<Vec<f64>>>, inventory: Vec<Vec<Vec<f64>>>) -> SimulationResult {
        let paths = demand.len();
        let horizon = demand[0].len();
        let echelons = orders[0].len();
        let config = ChainConfig::new(
            "t",
            (0..echelons).map(|k| EchelonConfig::new(&format!("E{k}"), 2, 1.0, 1.0)).collect(),
        )
        .unwrap();
        let flat = |x: &Vec<Vec<Vec<f64>>>| x.iter().flatten().flatten().copied().collect::<Vec<_>>();
        let orders_flat = flat(&orders);
        SimulationResult {
            paths,
            echelons,
            horizon,
            costs: orders_flat.iter().map(|x| x.abs()).collect(),
            orders: orders_flat,
            inventory: flat(&inventory),
            demand: demand.concat(),
            config,
            seed: 0,
            burn_in: 0,
        }
    }

    #[test]
    fn bwr_examples() {
        let d = vec![1.0, 3.0, 2.0, 6.0];
        let r = result(vec![d.clone()], vec![vec![d.clone()]], vec![vec![d.clone()]]);
        assert_eq!(bwr(&r, 0).unwrap().mean, 1.0);
        assert_eq!(nsamp(&r, 0).unwrap().mean, 1.0);
        // Var([0,2,0,2]) = 4/3, Var([0,0,0,2]) = 1; scale so the ratio is 4/2
        let num = vec![0.0, 2.0, 0.0, 2.0];
        let den: Vec<f64> = num.iter().map(|x| x / 2f64.sqrt()).collect();
        let r = result(vec![den], vec![vec![num]], vec![vec![vec![5.0; 4]]]);
        assert!((bwr(&r, 0).unwrap().mean - 2.0).abs() < 1e-12);
        assert_eq!(nsamp(&r, 0).unwrap().mean, 0.0);
        let r = result(vec![d.clone()], vec![vec![vec![0.3; 4]]], vec![vec![d]]);
        assert_eq!(bwr(&r, 0).unwrap().mean, 0.0);
    }

    #[test]
    fn degenerate_denominators() {
        let r = result(vec![vec![4.0; 5]], vec![vec![vec![4.0; 5]]], vec![vec![vec![0.0; 5]]]);
        let b = bwr(&r, 0).unwrap();
        assert_eq!((b.mean, b.degenerate_paths), (1.0, 1));
        let r = result(vec![vec![4.0; 5]], vec![vec![vec![4.0, 5.0, 4.0, 4.0, 4.0]]], vec![vec![vec![0.0; 5]]]);
        assert_eq!(bwr(&r, 0).unwrap().mean, f64::INFINITY);
    }

    #[test]
    fn fill_rate_examples() {
        let d = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let fr = |inv: Vec<f64>| fill_rate(&result(d.clone(), vec![vec![vec![1.0; 4]]], vec![vec![inv]]), 0).unwrap().mean;
        assert_eq!(fr(vec![1.0, -1.0, 0.0, 5.0]), 0.75);
        assert_eq!(fr(vec![1.0; 4]), 1.0);
        assert_eq!(fr(vec![-1.0; 4]), 0.0);
    }

    #[test]
    fn cumulative_is_product_and_telescopes() {
        let d = vec![1.0, 3.0, 2.0, 6.0, 4.0];
        let o1 = vec![0.0, 5.0, 1.0, 9.0, 4.0];
        let o2 = vec![3.0, 0.0, 12.0, 1.0, 8.0];
        let r = result(vec![d.clone()], vec![vec![o1.clone(), o2.clone()]], vec![vec![d.clone(), d.clone()]]);
        let b1 = bwr(&r, 0).unwrap().mean;
        let b2 = bwr(&r, 1).unwrap().mean;
        let c = cumulative_bwr(&r, 1).unwrap().mean;
        assert!((c - b1 * b2).abs() < 1e-12 * c);
        let direct = telescoped_bwr(&r, 1).unwrap()[0];
        assert!(((c - direct) / direct).abs() < 1e-9);
    }

    #[test]
    fn total_cost_accumulates_upstream() {
        let r = result(
            vec![vec![1.0, 2.0]],
            vec![vec![vec![1.0, 2.0], vec![10.0, 20.0]]],
            vec![vec![vec![0.0; 2], vec![0.0; 2]]],
        );
        assert_eq!(total_cost(&r, 0).unwrap().mean, 3.0);
        assert_eq!(total_cost(&r, 1).unwrap().mean, 33.0);
        assert_eq!(total_cost(&r.clone().with_burn_in(1), 1).unwrap().mean, 22.0);
    }

    #[test]
    fn chen_bound_examples() {
        assert!((chen_lower_bound(2, 10).unwrap() - 1.78).abs() < 1e-12);
        assert!((chen_lower_bound(4, 10).unwrap() - 2.5).abs() < 1e-12);
        assert!((chen_lower_bound(12, 52).unwrap() - 1.625).abs() < 1e-12);
        assert!((chen_lower_bound(12, 10).unwrap() - 6.98).abs() < 1e-12);
        assert!(chen_lower_bound(2, 0).is_err());
    }

    #[test]
    fn scope_round_trips() {
        for s in [Scope::Echelon(0), Scope::Echelon(11), Scope::Chain] {
            assert_eq!(s.to_string().parse::<Scope>().unwrap(), s);
        }
        assert!("E0".parse::<Scope>().is_err());
    }
}
