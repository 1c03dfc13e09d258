//! Fixed experiment protocols: analytical validation, filtering, lead-time,
//! policy, cross-chain and replay comparisons.
//!
//! Each returns plain numbers so callers (the CLI, tests) decide how to
//! judge or print them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{cumulative_concentration_report, filtering_report, ConcentrationReport, FilteringReport};
use crate::benchmark::{lookup, run_benchmark, sweep_parameter, BenchmarkSpec, ChainRef, ComponentSpec, SweepTarget};
use crate::config::{builtin_chain, ChainConfig, EchelonConfig};
use crate::cost::Newsvendor;
use crate::demand::{generate_batch, DemandBatch, DemandGenerator, IidNormal, Replay, SemiconductorAr1};
use crate::engine::{simulate_batch, EngineOptions, SimulationResult};
use crate::error::{Error, Result};
use crate::forecast::{ForecastBatch, Forecaster, GlobalConstant, MovingAverage, Naive};
use crate::metrics::{bwr, chen_lower_bound, cumulative_bwr, MetricValue};
use crate::policy::OrderUpTo;
use crate::registry::Registry;

/// `(L, p)` pairs of the single-echelon validation grid.
pub const CHEN_GRID: [(usize, usize); 8] = [
    (2, 10),
    (4, 10),
    (4, 20),
    (8, 20),
    (8, 52),
    (12, 52),
    (2, 52),
    (12, 10),
];

pub const SEMICONDUCTOR: &str = "semiconductor_4tier";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChenRow {
    pub lead_time: usize,
    pub window: usize,
    pub bound: f64,
    pub simulated: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChenSettings {
    pub paths: usize,
    pub horizon: usize,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for ChenSettings {
    fn default() -> Self {
        ChenSettings {
            paths: 2000,
            horizon: 520,
            mu: 100.0,
            sigma: 10.0,
            seed: 42,
        }
    }
}

/// One echelon facing i.i.d. normal demand, MA(p) forecasts, order-up-to.
///
/// Holding and backorder costs are equal, so the safety factor is zero and
/// the order reduces to the bound's own recursion. The first `p + 1`
/// periods (partial windows) are excluded.
pub fn validate_chen(grid: &[(usize, usize)], s: &ChenSettings) -> Result<Vec<ChenRow>> {
    if grid.is_empty() {
        return Err(Error::Empty("(L, p) grid"));
    }
    let gen = IidNormal::new(s.mu, s.sigma)?;
    let demand = generate_batch(&gen, s.horizon, s.paths, s.seed)?;
    grid.iter()
        .map(|&(l, p)| {
            let chain = ChainConfig::new(&format!("single_l{l}"), vec![EchelonConfig::new("Single", l, 1.0, 1.0)])?;
            let fc = MovingAverage::new(p)?.generate_forecasts(&demand, gen.prior())?;
            let opts = EngineOptions {
                burn_in: p + 1,
                ..EngineOptions::default()
            };
            if s.horizon <= opts.burn_in + 1 {
                return Err(Error::invalid("T", format!("must exceed p + 2 = {}", p + 2)));
            }
            let res = simulate_batch(&chain, &demand, &fc, &OrderUpTo, &Newsvendor, &opts)?;
            let simulated = bwr(&res, 0)?.mean;
            let bound = chen_lower_bound(l, p)?;
            Ok(ChenRow {
                lead_time: l,
                window: p,
                bound,
                simulated,
                rel_error: (simulated - bound) / bound,
            })
        })
        .collect()
}

pub fn chen_csv(rows: &[ChenRow]) -> String {
    let mut s = String::from("L,p,bound,simulated,rel_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.6},{:.6},{:.6}", r.lead_time, r.window, r.bound, r.simulated, r.rel_error);
    }
    s
}

/// Monte Carlo run of the semiconductor chain under the default AR(1)
/// demand with the pooled full-sample forecast.
pub fn pooled_forecast_run(paths: usize, horizon: usize, seed: u64) -> Result<SimulationResult> {
    let chain = builtin_chain(SEMICONDUCTOR)?;
    let gen = SemiconductorAr1::default();
    let demand = generate_batch(&gen, horizon, paths, seed)?;
    let fc = GlobalConstant.generate_forecasts(&demand, gen.prior())?;
    simulate_batch(&chain, &demand, &fc, &OrderUpTo, &Newsvendor, &EngineOptions::default())
}

#[derive(Debug, Clone)]
pub struct FilteringOutcome {
    pub bwr: Vec<MetricValue>,
    pub report: FilteringReport,
}

pub fn filtering_protocol(paths: usize, horizon: usize, seed: u64) -> Result<FilteringOutcome> {
    let res = pooled_forecast_run(paths, horizon, seed)?;
    let bwr = (0..res.echelons).map(|k| bwr(&res, k)).collect::<Result<Vec<_>>>()?;
    Ok(FilteringOutcome {
        bwr,
        report: filtering_report(&res)?,
    })
}

pub fn concentration_protocol(paths: usize, horizon: usize, seed: u64) -> Result<ConcentrationReport> {
    cumulative_concentration_report(&pooled_forecast_run(paths, horizon, seed)?)
}

/// Each row's own full-sample mean and std, repeated over the row.
pub fn per_path_constant_forecasts(demand: &DemandBatch) -> Result<ForecastBatch> {
    let t = demand.horizon;
    let mut means = vec![0.0; demand.paths * t];
    let mut stds = vec![0.0; demand.paths * t];
    for i in 0..demand.paths {
        GlobalConstant.forecast_path(demand.row(i), None, &mut means[i * t..(i + 1) * t], &mut stds[i * t..(i + 1) * t])?;
    }
    Ok(ForecastBatch {
        means,
        stds,
        paths: demand.paths,
        horizon: t,
    })
}

pub const LEAD_TIME_SCENARIOS: [(&str, [usize; 4]); 3] =
    [("short", [1, 2, 4, 2]), ("baseline", [2, 4, 12, 8]), ("long", [4, 8, 20, 12])];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub lead_times: Vec<usize>,
    /// Mean over paths of the cumulative ratio at the last echelon.
    pub cum_bwr: f64,
    pub median_cum_bwr: f64,
}

/// Which E1 forecast the lead-time protocol uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadTimeForecast {
    /// Each path's own full-sample constant (not causal).
    PathConstant,
    /// The causal expanding-window forecaster.
    Naive,
}

pub fn lead_time_protocol(paths: usize, horizon: usize, seed: u64, mode: LeadTimeForecast) -> Result<Vec<ScenarioRow>> {
    let base = builtin_chain(SEMICONDUCTOR)?;
    let gen = SemiconductorAr1::default();
    let demand = generate_batch(&gen, horizon, paths, seed)?;
    let fc = match mode {
        LeadTimeForecast::PathConstant => per_path_constant_forecasts(&demand)?,
        LeadTimeForecast::Naive => Naive.generate_forecasts(&demand, gen.prior())?,
    };
    LEAD_TIME_SCENARIOS
        .iter()
        .map(|(name, lt)| {
            let chain = base.with_lead_times(lt)?;
            let res = simulate_batch(&chain, &demand, &fc, &OrderUpTo, &Newsvendor, &EngineOptions::default())?;
            let cum = cumulative_bwr(&res, chain.len() - 1)?;
            Ok(ScenarioRow {
                scenario: name.to_string(),
                lead_times: lt.to_vec(),
                cum_bwr: cum.mean,
                median_cum_bwr: cum.median,
            })
        })
        .collect()
}

fn semiconductor_spec(paths: usize, horizon: usize, seed: u64) -> BenchmarkSpec {
    BenchmarkSpec {
        chain: ChainRef::Named(SEMICONDUCTOR.into()),
        demand: ComponentSpec::named("semiconductor_ar1"),
        horizon,
        paths,
        seed,
        policies: vec![ComponentSpec::named("order_up_to")],
        forecasters: vec![ComponentSpec::named("naive")],
        metrics: vec![ComponentSpec::named("cum_bwr")],
        cost: ComponentSpec::named("newsvendor"),
        burn_in: 0,
        ip_timing: Default::default(),
        statistic: Default::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: String,
    pub cum_bwr: f64,
    pub nsamp: f64,
    pub fill_rate: f64,
    pub total_cost: f64,
    /// Mean ratio at E1.
    pub bwr_e1: f64,
}

/// The four catalogued policies on one shared demand batch, read at the last echelon.
pub fn policy_protocol(reg: &Registry, paths: usize, horizon: usize, seed: u64) -> Result<Vec<PolicyRow>> {
    let mut spec = semiconductor_spec(paths, horizon, seed);
    spec.policies = vec![
        ComponentSpec::named("order_up_to"),
        ComponentSpec::named("proportional_out").with("alpha", 0.3),
        ComponentSpec::named("smoothing_out").with("beta", 0.3),
        ComponentSpec::named("constant_order"),
    ];
    spec.metrics = ["bwr", "cum_bwr", "nsamp", "fill_rate", "tc"].iter().map(|m| ComponentSpec::named(m)).collect();
    let run = run_benchmark(&spec, reg)?;
    if let Some(f) = run.failures.first() {
        return Err(Error::invalid("policy protocol", f.message.clone()));
    }
    let k = spec.chain.resolve()?.len();
    let pick = |label: &str, metric: &str, e: usize| -> f64 {
        lookup(&run.records, metric, e)
            .get(&(label.to_string(), "naive".to_string()))
            .copied()
            .unwrap_or(f64::NAN)
    };
    Ok(spec
        .policies
        .iter()
        .map(|p| {
            let l = p.label();
            PolicyRow {
                cum_bwr: pick(&l, "cum_bwr", k),
                nsamp: pick(&l, "nsamp", k),
                fill_rate: pick(&l, "fill_rate", k),
                total_cost: pick(&l, "tc", k),
                bwr_e1: pick(&l, "bwr", 1),
                policy: l,
            }
        })
        .collect())
}

/// Cumulative ratio at the last echelon of each builtin chain, OUT with naive forecasts.
pub fn cross_chain_protocol(reg: &Registry, paths: usize, horizon: usize, seed: u64) -> Result<Vec<(String, f64)>> {
    crate::config::BUILTIN_CHAINS
        .iter()
        .map(|name| {
            let mut spec = semiconductor_spec(paths, horizon, seed);
            spec.chain = ChainRef::Named(name.to_string());
            let k = spec.chain.resolve()?.len();
            let run = run_benchmark(&spec, reg)?;
            let v = lookup(&run.records, "cum_bwr", k)
                .into_values()
                .next()
                .ok_or_else(|| Error::invalid("cross-chain protocol", format!("no result for `{name}`")))?;
            Ok((name.to_string(), v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayComparison {
    pub replay_cum_bwr: f64,
    pub ar1_cum_bwr: f64,
    pub ratio: f64,
}

/// Bundled regime-switching replay vs the default AR(1), both OUT with naive forecasts.
pub fn replay_protocol(paths: usize, horizon: usize, seed: u64, noise_fraction: f64) -> Result<ReplayComparison> {
    let chain = builtin_chain(SEMICONDUCTOR)?;
    let k = chain.len() - 1;
    let run = |gen: &dyn DemandGenerator| -> Result<f64> {
        let demand = generate_batch(gen, horizon, paths, seed)?;
        let fc = Naive.generate_forecasts(&demand, gen.prior())?;
        let res = simulate_batch(&chain, &demand, &fc, &OrderUpTo, &Newsvendor, &EngineOptions::default())?;
        Ok(cumulative_bwr(&res, k)?.mean)
    };
    let replay_cum_bwr = run(&Replay::bundled(noise_fraction)?)?;
    let ar1_cum_bwr = run(&SemiconductorAr1::default())?;
    Ok(ReplayComparison {
        replay_cum_bwr,
        ar1_cum_bwr,
        ratio: replay_cum_bwr / ar1_cum_bwr,
    })
}

/// Total cost at the last echelon for OUT, POUT(0.5) and smoothing OUT as
/// the normalised cost ratio `b/h` varies.
pub fn cost_ratio_protocol(
    reg: &Registry,
    ratios: &[f64],
    paths: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<(f64, Vec<(String, f64)>)>> {
    let mut spec = semiconductor_spec(paths, horizon, seed);
    spec.policies = vec![
        ComponentSpec::named("order_up_to"),
        ComponentSpec::named("proportional_out").with("alpha", 0.5),
        ComponentSpec::named("smoothing_out").with("beta", 0.3),
    ];
    spec.metrics = vec![ComponentSpec::named("tc")];
    let k = spec.chain.resolve()?.len();
    let values: Vec<serde_json::Value> = ratios.iter().map(|r| json!(r)).collect();
    let points = sweep_parameter(&spec, reg, &SweepTarget::CostRatio, "b_over_h", &values)?;
    Ok(points
        .into_iter()
        .zip(ratios)
        .map(|(pt, &r)| {
            let costs = lookup(&pt.run.records, "tc", k)
                .into_iter()
                .map(|((p, _), v)| (p, v))
                .collect();
            (r, costs)
        })
        .collect())
}

/// Cumulative ratio at the last echelon for POUT at each `alpha`.
pub fn pout_alpha_protocol(reg: &Registry, alphas: &[f64], paths: usize, horizon: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let mut spec = semiconductor_spec(paths, horizon, seed);
    spec.policies = vec![ComponentSpec::named("proportional_out")];
    let k = spec.chain.resolve()?.len();
    let target = SweepTarget::Component {
        category: crate::registry::Category::Policy,
        name: "proportional_out".into(),
    };
    let values: Vec<serde_json::Value> = alphas.iter().map(|a| json!(a)).collect();
    let points = sweep_parameter(&spec, reg, &target, "alpha", &values)?;
    Ok(points
        .into_iter()
        .zip(alphas)
        .map(|(pt, &a)| {
            let v = lookup(&pt.run.records, "cum_bwr", k).into_values().next().unwrap_or(f64::NAN);
            (a, v)
        })
        .collect())
}
