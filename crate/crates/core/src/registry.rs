//! Name-based component catalog.
//!
//! A [`Registry`] maps `(category, name)` to a factory that builds the
//! component from a parameter map. The builtin catalog is registered
//! explicitly by [`Registry::with_catalog`], and its metadata (description,
//! defaults, reference) comes from `data/catalog.json`. User components are
//! added with [`Registry::register`] before the registry is shared.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cost::{CostFunction, Newsvendor, Perishable};
use crate::demand::{load_replay_csv, Ar1Params, Arma, ArmaParams, BeerGame, DemandGenerator, IidNormal, Replay, SemiconductorAr1};
use crate::error::{Error, Result};
use crate::forecast::{DeepArHook, ExpSmoothing, Forecaster, GlobalConstant, MovingAverage, Naive};
use crate::metrics::{Bwr, ChenLowerBound, CumBwr, FillRate, Metric, NsAmp, TotalCost};
use crate::policy::{ConstantOrder, OrderUpTo, OrderingPolicy, ProportionalOut, SmoothingOut};

const CATALOG_JSON: &str = include_str!("../data/catalog.json");

pub type ParamMap = serde_json::Map<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Demand,
    Policy,
    Cost,
    Forecaster,
    Metric,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Demand,
        Category::Policy,
        Category::Cost,
        Category::Forecaster,
        Category::Metric,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Demand => "demand",
            Category::Policy => "policy",
            Category::Cost => "cost",
            Category::Forecaster => "forecaster",
            Category::Metric => "metric",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegistryKey {
    pub category: Category,
    pub name: String,
}

impl RegistryKey {
    pub fn new(category: Category, name: &str) -> Result<Self> {
        if !valid_name(name) {
            return Err(Error::InvalidName(name.to_string()));
        }
        Ok(RegistryKey {
            category,
            name: name.to_string(),
        })
    }
}

pub fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// A constructed component.
#[derive(Clone)]
pub enum Component {
    Demand(Arc<dyn DemandGenerator>),
    Policy(Arc<dyn OrderingPolicy>),
    Cost(Arc<dyn CostFunction>),
    Forecaster(Arc<dyn Forecaster>),
    Metric(Arc<dyn Metric>),
}

impl Component {
    pub fn category(&self) -> Category {
        match self {
            Component::Demand(_) => Category::Demand,
            Component::Policy(_) => Category::Policy,
            Component::Cost(_) => Category::Cost,
            Component::Forecaster(_) => Category::Forecaster,
            Component::Metric(_) => Category::Metric,
        }
    }
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Demand(x) => write!(f, "Demand({x:?})"),
            Component::Policy(x) => write!(f, "Policy({x:?})"),
            Component::Cost(x) => write!(f, "Cost({x:?})"),
            Component::Forecaster(x) => write!(f, "Forecaster({x:?})"),
            Component::Metric(x) => write!(f, "Metric({x:?})"),
        }
    }
}

pub type Factory = Arc<dyn Fn(&ParamMap) -> Result<Component> + Send + Sync>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub description: String,
    #[serde(default)]
    pub defaults: ParamMap,
    #[serde(default)]
    pub reference: String,
}

#[derive(Clone)]
pub struct ComponentEntry {
    pub key: RegistryKey,
    pub factory: Factory,
    pub metadata: Metadata,
}

impl fmt::Debug for ComponentEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComponentEntry")
            .field("key", &self.key)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

/// One row of `catalog.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogRecord {
    pub category: Category,
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub defaults: ParamMap,
    #[serde(default)]
    pub reference: String,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: BTreeMap<RegistryKey, ComponentEntry>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    /// Every builtin component, with metadata from the bundled catalog.
    pub fn with_catalog() -> Result<Self> {
        let records: Vec<CatalogRecord> =
            serde_json::from_str(CATALOG_JSON).map_err(|e| Error::parse("catalog.json", e))?;
        let mut meta: BTreeMap<RegistryKey, Metadata> = BTreeMap::new();
        for r in records {
            let key = RegistryKey::new(r.category, &r.name)?;
            let m = Metadata {
                description: r.description,
                defaults: r.defaults,
                reference: r.reference,
            };
            if meta.insert(key.clone(), m).is_some() {
                return Err(Error::Catalog(format!("{} `{}` appears twice", key.category, key.name)));
            }
        }
        let mut reg = Registry::empty();
        for (category, name, factory) in builtin_factories() {
            let key = RegistryKey::new(category, name)?;
            let metadata = meta
                .remove(&key)
                .ok_or_else(|| Error::Catalog(format!("{category} `{name}` has no catalog entry")))?;
            reg.register(key, factory, metadata)?;
        }
        if let Some((key, _)) = meta.into_iter().next() {
            return Err(Error::Catalog(format!(
                "catalog lists {} `{}` but nothing provides it",
                key.category, key.name
            )));
        }
        Ok(reg)
    }

    /// Add a component. Its defaults must construct successfully.
    pub fn register(&mut self, key: RegistryKey, factory: Factory, metadata: Metadata) -> Result<()> {
        if !valid_name(&key.name) {
            return Err(Error::InvalidName(key.name));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateRegistration {
                category: key.category.to_string(),
                name: key.name,
            });
        }
        let built = factory(&metadata.defaults).map_err(|e| {
            Error::Catalog(format!("defaults of {} `{}` are rejected: {e}", key.category, key.name))
        })?;
        if built.category() != key.category {
            return Err(Error::Catalog(format!(
                "{} `{}` builds a {} component",
                key.category,
                key.name,
                built.category()
            )));
        }
        self.entries.insert(
            key.clone(),
            ComponentEntry {
                key,
                factory,
                metadata,
            },
        );
        Ok(())
    }

    pub fn entry(&self, category: Category, name: &str) -> Result<&ComponentEntry> {
        let key = RegistryKey {
            category,
            name: name.to_string(),
        };
        self.entries.get(&key).ok_or_else(|| Error::UnknownComponent {
            category: category.to_string(),
            name: name.to_string(),
            registered: self.list(category).join(", "),
        })
    }

    pub fn factory(&self, category: Category, name: &str) -> Result<&Factory> {
        Ok(&self.entry(category, name)?.factory)
    }

    /// Build a component with its defaults overlaid by `params`.
    pub fn get(&self, category: Category, name: &str, params: &ParamMap) -> Result<Component> {
        let entry = self.entry(category, name)?;
        let merged = self.resolve_params(category, name, params)?;
        (entry.factory)(&merged)
    }

    pub fn resolve_params(&self, category: Category, name: &str, params: &ParamMap) -> Result<ParamMap> {
        let mut merged = self.entry(category, name)?.metadata.defaults.clone();
        for (k, v) in params {
            merged.insert(k.clone(), v.clone());
        }
        Ok(merged)
    }

    pub fn list(&self, category: Category) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| k.category == category)
            .map(|k| k.name.clone())
            .collect()
    }

    /// Sorted names in a category given by name.
    pub fn list_registered(&self, category: &str) -> Result<Vec<String>> {
        Ok(self.list(category.parse()?))
    }

    pub fn entries(&self) -> impl Iterator<Item = &ComponentEntry> {
        self.entries.values()
    }

    pub fn demand(&self, name: &str, params: &ParamMap) -> Result<Arc<dyn DemandGenerator>> {
        match self.get(Category::Demand, name, params)? {
            Component::Demand(x) => Ok(x),
            other => Err(mismatch(Category::Demand, name, &other)),
        }
    }

    pub fn policy(&self, name: &str, params: &ParamMap) -> Result<Arc<dyn OrderingPolicy>> {
        match self.get(Category::Policy, name, params)? {
            Component::Policy(x) => Ok(x),
            other => Err(mismatch(Category::Policy, name, &other)),
        }
    }

    pub fn cost(&self, name: &str, params: &ParamMap) -> Result<Arc<dyn CostFunction>> {
        match self.get(Category::Cost, name, params)? {
            Component::Cost(x) => Ok(x),
            other => Err(mismatch(Category::Cost, name, &other)),
        }
    }

    pub fn forecaster(&self, name: &str, params: &ParamMap) -> Result<Arc<dyn Forecaster>> {
        match self.get(Category::Forecaster, name, params)? {
            Component::Forecaster(x) => Ok(x),
            other => Err(mismatch(Category::Forecaster, name, &other)),
        }
    }

    pub fn metric(&self, name: &str, params: &ParamMap) -> Result<Arc<dyn Metric>> {
        match self.get(Category::Metric, name, params)? {
            Component::Metric(x) => Ok(x),
            other => Err(mismatch(Category::Metric, name, &other)),
        }
    }
}

fn mismatch(category: Category, name: &str, got: &Component) -> Error {
    Error::Catalog(format!("{category} `{name}` built a {} component", got.category()))
}

/// The builtin catalog, built once.
pub fn catalog() -> &'static Registry {
    static CATALOG: OnceLock<Registry> = OnceLock::new();
    CATALOG.get_or_init(|| Registry::with_catalog().expect("bundled catalog is consistent"))
}

/// Reads named parameters out of a map, rejecting keys nobody asked for.
pub struct Params<'a> {
    map: &'a ParamMap,
    allowed: &'a [&'a str],
}

impl<'a> Params<'a> {
    pub fn new(map: &'a ParamMap, allowed: &'a [&'a str]) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(
                k.as_str(),
                format!("unknown parameter; expected one of: {}", allowed.join(", ")),
            ));
        }
        Ok(Params { map, allowed })
    }

    fn raw(&self, name: &str) -> Option<&Value> {
        debug_assert!(self.allowed.contains(&name));
        self.map.get(name).filter(|v| !v.is_null())
    }

    pub fn f64(&self, name: &str) -> Result<Option<f64>> {
        match self.raw(name) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Error::invalid(name, format!("expected a number, got {v}"))),
        }
    }

    pub fn req_f64(&self, name: &str) -> Result<f64> {
        self.f64(name)?.ok_or_else(|| Error::invalid(name, "is required"))
    }

    pub fn usize(&self, name: &str) -> Result<Option<usize>> {
        match self.raw(name) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .or_else(|| v.as_f64().filter(|x| x.fract() == 0.0 && *x >= 0.0).map(|x| x as u64))
                .map(|x| Some(x as usize))
                .ok_or_else(|| Error::invalid(name, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    pub fn req_usize(&self, name: &str) -> Result<usize> {
        self.usize(name)?.ok_or_else(|| Error::invalid(name, "is required"))
    }

    pub fn str(&self, name: &str) -> Result<Option<&'a str>> {
        match self.map.get(name).filter(|v| !v.is_null()) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| Error::invalid(name, format!("expected a string, got {v}"))),
        }
    }

    pub fn f64_list(&self, name: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(name) {
            None => Ok(None),
            Some(Value::Array(xs)) => xs
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::invalid(name, format!("`{x}` is not a number"))))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(Error::invalid(name, format!("expected a list of numbers, got {v}"))),
        }
    }
}

/// Deserialize a whole parameter struct (unknown keys are rejected by the struct).
pub fn params_as<T: DeserializeOwned>(what: &str, map: &ParamMap) -> Result<T> {
    serde_json::from_value(Value::Object(map.clone())).map_err(|e| Error::invalid(what, e.to_string()))
}

fn factory<F>(f: F) -> Factory
where
    F: Fn(&ParamMap) -> Result<Component> + Send + Sync + 'static,
{
    Arc::new(f)
}

fn builtin_factories() -> Vec<(Category, &'static str, Factory)> {
    use Category::*;
    vec![
        (
            Demand,
            "semiconductor_ar1",
            factory(|m| {
                let p: Ar1Params = params_as("semiconductor_ar1", m)?;
                Ok(Component::Demand(Arc::new(SemiconductorAr1::new(p)?)))
            }),
        ),
        (
            Demand,
            "beer_game",
            factory(|m| {
                let p = Params::new(m, &["low", "high", "step_period"])?;
                let d = BeerGame::default();
                let g = BeerGame::new(
                    p.f64("low")?.unwrap_or(d.low),
                    p.f64("high")?.unwrap_or(d.high),
                    p.usize("step_period")?.unwrap_or(d.step_period),
                )?;
                Ok(Component::Demand(Arc::new(g)))
            }),
        ),
        (
            Demand,
            "arma",
            factory(|m| {
                let p: ArmaParams = params_as("arma", m)?;
                Ok(Component::Demand(Arc::new(Arma::new(p)?)))
            }),
        ),
        (
            Demand,
            "replay",
            factory(|m| {
                let p = Params::new(m, &["noise_fraction", "values", "path"])?;
                let noise = p.f64("noise_fraction")?.unwrap_or(0.0);
                let source = match (p.f64_list("values")?, p.str("path")?) {
                    (Some(_), Some(_)) => {
                        return Err(Error::invalid("values", "give either `values` or `path`, not both"))
                    }
                    (Some(v), None) => v,
                    (None, Some(path)) => load_replay_csv(std::path::Path::new(path))?,
                    (None, None) => crate::demand::bundled_regime_switching(),
                };
                Ok(Component::Demand(Arc::new(Replay::new(source, noise)?)))
            }),
        ),
        (
            Demand,
            "iid_normal",
            factory(|m| {
                let p = Params::new(m, &["mu", "sigma"])?;
                let g = IidNormal::new(p.req_f64("mu")?, p.req_f64("sigma")?)?;
                Ok(Component::Demand(Arc::new(g)))
            }),
        ),
        (
            Policy,
            "order_up_to",
            factory(|m| {
                Params::new(m, &[])?;
                Ok(Component::Policy(Arc::new(OrderUpTo)))
            }),
        ),
        (
            Policy,
            "proportional_out",
            factory(|m| {
                let p = Params::new(m, &["alpha"])?;
                Ok(Component::Policy(Arc::new(ProportionalOut::new(p.req_f64("alpha")?)?)))
            }),
        ),
        (
            Policy,
            "smoothing_out",
            factory(|m| {
                let p = Params::new(m, &["beta"])?;
                Ok(Component::Policy(Arc::new(SmoothingOut::new(p.req_f64("beta")?)?)))
            }),
        ),
        (
            Policy,
            "constant_order",
            factory(|m| {
                let p = Params::new(m, &["quantity"])?;
                Ok(Component::Policy(Arc::new(ConstantOrder::new(p.req_f64("quantity")?)?)))
            }),
        ),
        (
            Cost,
            "newsvendor",
            factory(|m| {
                Params::new(m, &[])?;
                Ok(Component::Cost(Arc::new(Newsvendor)))
            }),
        ),
        (
            Cost,
            "perishable",
            factory(|m| {
                let p = Params::new(m, &["gamma", "buffer"])?;
                let d = Perishable::default();
                let c = Perishable::new(p.f64("gamma")?.unwrap_or(d.gamma), p.f64("buffer")?.unwrap_or(d.buffer))?;
                Ok(Component::Cost(Arc::new(c)))
            }),
        ),
        (
            Forecaster,
            "naive",
            factory(|m| {
                Params::new(m, &[])?;
                Ok(Component::Forecaster(Arc::new(Naive)))
            }),
        ),
        (
            Forecaster,
            "moving_average",
            factory(|m| {
                let p = Params::new(m, &["window"])?;
                Ok(Component::Forecaster(Arc::new(MovingAverage::new(p.req_usize("window")?)?)))
            }),
        ),
        (
            Forecaster,
            "exponential_smoothing",
            factory(|m| {
                let p = Params::new(m, &["alpha"])?;
                Ok(Component::Forecaster(Arc::new(ExpSmoothing::new(p.req_f64("alpha")?)?)))
            }),
        ),
        (
            Forecaster,
            "deepar",
            factory(|m| {
                Params::new(m, &[])?;
                Ok(Component::Forecaster(Arc::new(DeepArHook)))
            }),
        ),
        (
            Forecaster,
            "global_constant",
            factory(|m| {
                Params::new(m, &[])?;
                Ok(Component::Forecaster(Arc::new(GlobalConstant)))
            }),
        ),
        (Metric, "bwr", unit_metric(|| Arc::new(Bwr))),
        (Metric, "cum_bwr", unit_metric(|| Arc::new(CumBwr))),
        (Metric, "nsamp", unit_metric(|| Arc::new(NsAmp))),
        (Metric, "fill_rate", unit_metric(|| Arc::new(FillRate))),
        (Metric, "tc", unit_metric(|| Arc::new(TotalCost))),
        (
            Metric,
            "chen_lower_bound",
            factory(|m| {
                let p = Params::new(m, &["window"])?;
                Ok(Component::Metric(Arc::new(ChenLowerBound::new(p.req_usize("window")?)?)))
            }),
        ),
    ]
}

fn unit_metric(make: fn() -> Arc<dyn Metric>) -> Factory {
    factory(move |m| {
        Params::new(m, &[])?;
        Ok(Component::Metric(make()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn map(v: Value) -> ParamMap {
        v.as_object().cloned().unwrap()
    }

    #[test]
    fn catalog_listing() {
        let reg = catalog();
        assert_eq!(
            reg.list_registered("policy").unwrap(),
            ["constant_order", "order_up_to", "proportional_out", "smoothing_out"]
        );
        let metrics = reg.list_registered("metric").unwrap();
        assert_eq!(metrics.len(), 6);
        assert!(metrics.contains(&"chen_lower_bound".to_string()));
        assert!(matches!(reg.list_registered("widget"), Err(Error::UnknownCategory(_))));
    }

    #[test]
    fn get_overlays_defaults() {
        let reg = catalog();
        let p = reg.policy("proportional_out", &map(json!({"alpha": 0.5}))).unwrap();
        assert_eq!(p.builtin(), Some(crate::policy::BuiltinPolicy::Proportional { alpha: 0.5 }));
        let p = reg.policy("proportional_out", &ParamMap::new()).unwrap();
        assert_eq!(p.builtin(), Some(crate::policy::BuiltinPolicy::Proportional { alpha: 0.3 }));
        assert!(reg.policy("order_up_to", &ParamMap::new()).is_ok());
    }

    #[test]
    fn errors() {
        let reg = catalog();
        let e = reg.policy("nope", &ParamMap::new()).unwrap_err().to_string();
        assert!(e.contains("order_up_to"), "{e}");
        assert!(matches!(
            reg.policy("proportional_out", &map(json!({"alpha": 1.5}))),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            reg.policy("order_up_to", &map(json!({"alpha": 0.5}))),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(reg.demand("semiconductor_ar1", &map(json!({"phi": "x"}))).is_err());
        assert!(RegistryKey::new(Category::Policy, "Bad-Name").is_err());
        assert!(RegistryKey::new(Category::Policy, "").is_err());
    }

    #[test]
    fn duplicate_and_namespacing() {
        let mut reg = Registry::with_catalog().unwrap();
        let f = reg.factory(Category::Policy, "order_up_to").unwrap().clone();
        let key = RegistryKey::new(Category::Policy, "order_up_to").unwrap();
        assert!(matches!(
            reg.register(key, f.clone(), Metadata::default()),
            Err(Error::DuplicateRegistration { .. })
        ));
        // A cost factory under a policy key is caught at registration.
        let cost = reg.factory(Category::Cost, "newsvendor").unwrap().clone();
        assert!(reg
            .register(RegistryKey::new(Category::Policy, "newsvendor").unwrap(), cost.clone(), Metadata::default())
            .is_err());
        let key = RegistryKey::new(Category::Cost, "order_up_to").unwrap();
        reg.register(key, cost, Metadata::default()).unwrap();
        assert!(reg.cost("order_up_to", &ParamMap::new()).is_ok());
        assert!(reg.policy("order_up_to", &ParamMap::new()).is_ok());
    }

    #[test]
    fn every_builtin_builds_with_defaults() {
        let reg = catalog();
        for e in reg.entries() {
            let c = reg.get(e.key.category, &e.key.name, &ParamMap::new()).unwrap();
            assert_eq!(c.category(), e.key.category);
            assert!(!e.metadata.description.is_empty());
        }
    }
}
