//! Policy x forecaster sweeps over one shared demand batch.

mod export;
mod scaling;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use export::{export_table, format_sig, parse_csv, render_table, TableFormat, RECORD_HEADER};
pub use scaling::{run_scaling_harness, scaling_csv, ScalingAxes, ScalingBase, ScalingRow, SCALING_HEADER};

use crate::config::{builtin_chain, ChainConfig, BUILTIN_CHAINS};
use crate::cost::CostFunction;
use crate::demand::{digest_values, generate_batch, DemandBatch, DemandGenerator};
use crate::engine::{simulate_batch, EngineOptions, IpTiming};
use crate::error::{Error, Result};
use crate::forecast::{ForecastBatch, ForecastPair, Forecaster};
use crate::metrics::{Metric, Statistic};
use crate::policy::OrderingPolicy;
use crate::registry::{Category, ParamMap, Registry};

/// A builtin chain name, a path to a chain TOML file, or an inline chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainRef {
    Named(String),
    Inline(ChainConfig),
}

impl ChainRef {
    pub fn resolve(&self) -> Result<ChainConfig> {
        match self {
            ChainRef::Inline(c) => {
                c.validate()?;
                Ok(c.clone())
            }
            ChainRef::Named(name) if BUILTIN_CHAINS.contains(&name.as_str()) => builtin_chain(name),
            ChainRef::Named(path) => {
                let p = Path::new(path);
                if p.exists() {
                    ChainConfig::load(p)
                } else {
                    builtin_chain(path)
                }
            }
        }
    }
}

/// A registry name plus parameters overriding the catalog defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: ParamMap,
    /// Column label; derived from the name and parameters when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ComponentSpec {
    pub fn named(name: &str) -> Self {
        ComponentSpec {
            name: name.to_string(),
            params: ParamMap::new(),
            label: None,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// `name`, or `name(k=v;...)` when parameters are given.
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        if self.params.is_empty() {
            return self.name.clone();
        }
        let parts: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={}", plain(v))).collect();
        format!("{}({})", self.name, parts.join(";"))
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn default_cost() -> ComponentSpec {
    ComponentSpec::named("newsvendor")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub chain: ChainRef,
    pub demand: ComponentSpec,
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    pub policies: Vec<ComponentSpec>,
    pub forecasters: Vec<ComponentSpec>,
    pub metrics: Vec<ComponentSpec>,
    #[serde(default = "default_cost")]
    pub cost: ComponentSpec,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub ip_timing: IpTiming,
    #[serde(default)]
    pub statistic: Statistic,
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Empty("policy set"));
        }
        if self.forecasters.is_empty() {
            return Err(Error::Empty("forecaster set"));
        }
        if self.metrics.is_empty() {
            return Err(Error::Empty("metric set"));
        }
        if self.paths == 0 {
            return Err(Error::invalid("paths", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: BenchmarkSpec = toml::from_str(text).map_err(|e| Error::parse("benchmark spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("benchmark spec", e))
    }

    /// The same spec with every component's parameters made explicit.
    pub fn resolved(&self, reg: &Registry) -> Result<Self> {
        let fill = |cat: Category, c: &ComponentSpec| -> Result<ComponentSpec> {
            Ok(ComponentSpec {
                name: c.name.clone(),
                params: reg.resolve_params(cat, &c.name, &c.params)?,
                label: Some(c.label()),
            })
        };
        let all = |cat: Category, cs: &[ComponentSpec]| cs.iter().map(|c| fill(cat, c)).collect::<Result<Vec<_>>>();
        Ok(BenchmarkSpec {
            chain: ChainRef::Inline(self.chain.resolve()?),
            demand: fill(Category::Demand, &self.demand)?,
            policies: all(Category::Policy, &self.policies)?,
            forecasters: all(Category::Forecaster, &self.forecasters)?,
            metrics: all(Category::Metric, &self.metrics)?,
            cost: fill(Category::Cost, &self.cost)?,
            ..self.clone()
        })
    }

    fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            ip_timing: self.ip_timing,
            burn_in: self.burn_in,
            ..EngineOptions::default()
        }
    }
}

/// One row of the standardized output table. `echelon` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub policy: String,
    pub forecaster: String,
    pub echelon: usize,
    pub metric: String,
    pub value: f64,
}

/// Marker metric name of the row recorded for a failed combination.
pub const ERROR_METRIC: &str = "error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub policy: String,
    pub forecaster: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub records: Vec<BenchmarkRecord>,
    pub failures: Vec<Failure>,
    /// Digest of the demand batch every combination consumed.
    pub demand_digest: String,
}

/// Everything a run needs, resolved from the registry up front.
struct Resolved {
    chain: ChainConfig,
    generator: Arc<dyn DemandGenerator>,
    policies: Vec<(String, Arc<dyn OrderingPolicy>)>,
    forecasters: Vec<(String, Arc<dyn Forecaster>)>,
    metrics: Vec<Arc<dyn Metric>>,
    cost: Arc<dyn CostFunction>,
}

fn resolve(spec: &BenchmarkSpec, reg: &Registry) -> Result<Resolved> {
    spec.validate()?;
    let labelled = |cs: &[ComponentSpec]| -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for c in cs {
            if !seen.insert(c.label()) {
                return Err(Error::invalid("label", format!("`{}` appears twice", c.label())));
            }
        }
        Ok(())
    };
    labelled(&spec.policies)?;
    labelled(&spec.forecasters)?;
    labelled(&spec.metrics)?;
    Ok(Resolved {
        chain: spec.chain.resolve()?,
        generator: reg.demand(&spec.demand.name, &spec.demand.params)?,
        policies: spec
            .policies
            .iter()
            .map(|c| Ok((c.label(), reg.policy(&c.name, &c.params)?)))
            .collect::<Result<_>>()?,
        forecasters: spec
            .forecasters
            .iter()
            .map(|c| Ok((c.label(), reg.forecaster(&c.name, &c.params)?)))
            .collect::<Result<_>>()?,
        metrics: spec
            .metrics
            .iter()
            .map(|c| reg.metric(&c.name, &c.params))
            .collect::<Result<_>>()?,
        cost: reg.cost(&spec.cost.name, &spec.cost.params)?,
    })
}

/// Generate the demand batch once and evaluate every policy x forecaster
/// pair on it. A failing pair becomes an error row and a [`Failure`].
pub fn run_benchmark(spec: &BenchmarkSpec, reg: &Registry) -> Result<BenchmarkRun> {
    let r = resolve(spec, reg)?;
    let demand = generate_batch(r.generator.as_ref(), spec.horizon, spec.paths, spec.seed)?;
    run_on(spec, &r, &demand, r.generator.prior())
}

fn run_on(spec: &BenchmarkSpec, r: &Resolved, demand: &DemandBatch, prior: Option<ForecastPair>) -> Result<BenchmarkRun> {
    let digest = demand.digest();
    let opts = spec.engine_options();
    let k = r.chain.len();
    let mut records = Vec::with_capacity(r.policies.len() * r.forecasters.len() * k * r.metrics.len());
    let mut failures = Vec::new();
    let mut failed: Vec<(String, String, String)> = Vec::new();
    let mut fail = |p: &str, f: &str, e: String| failed.push((p.to_string(), f.to_string(), e));

    for (f_label, forecaster) in &r.forecasters {
        let fc: Result<ForecastBatch> = forecaster.generate_forecasts(demand, prior);
        for (p_label, policy) in &r.policies {
            let fc = match &fc {
                Ok(fc) => fc,
                Err(e) => {
                    fail(p_label, f_label, format!("forecast generation: {e}"));
                    continue;
                }
            };
            let outcome = (|| -> Result<Vec<BenchmarkRecord>> {
                let res = simulate_batch(&r.chain, demand, fc, policy.as_ref(), r.cost.as_ref(), &opts)?;
                if digest_values(res.paths, res.horizon, &res.demand) != digest {
                    return Err(Error::ShapeMismatch("simulation did not consume the shared demand batch".into()));
                }
                let mut rows = Vec::with_capacity(k * r.metrics.len());
                for m in &r.metrics {
                    for e in 0..k {
                        let v = m.compute(&res, e)?;
                        rows.push(BenchmarkRecord {
                            policy: p_label.clone(),
                            forecaster: f_label.clone(),
                            echelon: e + 1,
                            metric: m.name().to_string(),
                            value: v.stat(spec.statistic),
                        });
                    }
                }
                Ok(rows)
            })();
            match outcome {
                Ok(rows) => records.extend(rows),
                Err(e) => fail(p_label, f_label, e.to_string()),
            }
        }
    }
    for (p_label, f_label, e) in failed {
        let message = format!("policy `{p_label}`, forecaster `{f_label}`: {e}");
        log::warn!("benchmark combination failed: {message}");
        records.push(BenchmarkRecord {
            policy: p_label.clone(),
            forecaster: f_label.clone(),
            echelon: 0,
            metric: ERROR_METRIC.to_string(),
            value: f64::NAN,
        });
        failures.push(Failure {
            policy: p_label,
            forecaster: f_label,
            message,
        });
    }
    sort_records(&mut records);
    Ok(BenchmarkRun {
        records,
        failures,
        demand_digest: digest,
    })
}

/// Canonical order: policy, forecaster, echelon, metric.
pub fn sort_records(records: &mut [BenchmarkRecord]) {
    records.sort_by(|a, b| {
        (&a.policy, &a.forecaster, a.echelon, &a.metric).cmp(&(&b.policy, &b.forecaster, b.echelon, &b.metric))
    });
}

/// What a sweep varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepTarget {
    /// A parameter of every spec entry with this category and name.
    Component { category: Category, name: String },
    /// Backorder/holding ratio `b/h` with holding costs normalised to 1.
    CostRatio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: Value,
    pub run: BenchmarkRun,
}

/// One benchmark per value, all on the same demand batch.
pub fn sweep_parameter(
    spec: &BenchmarkSpec,
    reg: &Registry,
    target: &SweepTarget,
    param: &str,
    values: &[Value],
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    let variants = values
        .iter()
        .map(|v| variant(spec, target, param, v))
        .collect::<Result<Vec<_>>>()?;
    // Resolve everything first so a bad value fails before any simulation.
    let resolved = variants.iter().map(|s| resolve(s, reg)).collect::<Result<Vec<_>>>()?;
    let base = resolve(spec, reg)?;
    let demand = generate_batch(base.generator.as_ref(), spec.horizon, spec.paths, spec.seed)?;
    let prior = base.generator.prior();
    variants
        .iter()
        .zip(&resolved)
        .zip(values)
        .map(|((s, r), v)| {
            Ok(SweepPoint {
                value: v.clone(),
                run: run_on(s, r, &demand, prior)?,
            })
        })
        .collect()
}

fn variant(spec: &BenchmarkSpec, target: &SweepTarget, param: &str, v: &Value) -> Result<BenchmarkSpec> {
    let mut s = spec.clone();
    match target {
        SweepTarget::CostRatio => {
            let ratio = v
                .as_f64()
                .ok_or_else(|| Error::invalid(param, format!("expected a number, got {v}")))?;
            s.chain = ChainRef::Inline(spec.chain.resolve()?.with_normalized_costs(ratio)?);
        }
        SweepTarget::Component { category, name } => {
            let mut hits = 0;
            let mut set = |c: &mut ComponentSpec| {
                if &c.name == name {
                    c.params.insert(param.to_string(), v.clone());
                    hits += 1;
                }
            };
            match category {
                Category::Demand => {
                    return Err(Error::invalid(param, "demand is shared across a sweep and cannot be swept"));
                }
                Category::Policy => s.policies.iter_mut().for_each(&mut set),
                Category::Forecaster => s.forecasters.iter_mut().for_each(&mut set),
                Category::Metric => s.metrics.iter_mut().for_each(&mut set),
                Category::Cost => set(&mut s.cost),
            }
            if hits == 0 {
                return Err(Error::invalid(name.as_str(), format!("no {category} `{name}` in the benchmark spec")));
            }
        }
    }
    Ok(s)
}

/// Pick one value per (policy, forecaster) out of a record list.
pub fn lookup(records: &[BenchmarkRecord], metric: &str, echelon: usize) -> BTreeMap<(String, String), f64> {
    records
        .iter()
        .filter(|r| r.metric == metric && r.echelon == echelon)
        .map(|r| ((r.policy.clone(), r.forecaster.clone()), r.value))
        .collect()
}
