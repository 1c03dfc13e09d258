//! Chain and echelon configuration, plus the predefined chains.
//!
//! Echelons are stored downstream to upstream: index 0 faces the end
//! customer. Reports label them E1..EK.
//!
//! The on-disk form is TOML:
//!
//! ```toml
//! name = "semiconductor_4tier"
//!
//! [[echelon]]
//! role = "Distributor / OEM"
//! lead_time = 2
//! holding_cost = 0.15
//! backorder_cost = 0.6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BUILTIN_CHAINS: [&str; 3] = ["semiconductor_4tier", "beer_game", "consumer_2tier"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchelonConfig {
    #[serde(rename = "role")]
    pub role_label: String,
    pub lead_time: usize,
    pub holding_cost: f64,
    pub backorder_cost: f64,
}

impl EchelonConfig {
    pub fn new(role: &str, lead_time: usize, holding_cost: f64, backorder_cost: f64) -> Self {
        EchelonConfig {
            role_label: role.to_string(),
            lead_time,
            holding_cost,
            backorder_cost,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lead_time < 1 {
            return Err(Error::invalid("lead_time", "must be at least 1"));
        }
        let (h, b) = (self.holding_cost, self.backorder_cost);
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::invalid("holding_cost", format!("{h} is not a nonnegative number")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::invalid("backorder_cost", format!("{b} is not a nonnegative number")));
        }
        if h + b <= 0.0 {
            return Err(Error::invalid("holding_cost + backorder_cost", "must be positive"));
        }
        let alpha = self.critical_fractile();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(
                "critical_fractile",
                format!("b/(b+h) = {alpha} must lie strictly inside (0, 1)"),
            ));
        }
        Ok(())
    }

    /// Newsvendor critical fractile b / (b + h).
    pub fn critical_fractile(&self) -> f64 {
        self.backorder_cost / (self.backorder_cost + self.holding_cost)
    }
}

/// Free-function form of [`EchelonConfig::critical_fractile`].
pub fn critical_fractile(e: &EchelonConfig) -> f64 {
    e.critical_fractile()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub name: String,
    #[serde(rename = "echelon")]
    pub echelons: Vec<EchelonConfig>,
}

impl ChainConfig {
    pub fn new(name: &str, echelons: Vec<EchelonConfig>) -> Result<Self> {
        let chain = ChainConfig {
            name: name.to_string(),
            echelons,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.echelons.is_empty() {
            return Err(Error::Empty("chain echelon list"));
        }
        for (k, e) in self.echelons.iter().enumerate() {
            e.validate().map_err(|err| Error::Simulation {
                context: format!("chain `{}` echelon E{}", self.name, k + 1),
                source: Box::new(err),
            })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.echelons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.echelons.is_empty()
    }

    pub fn lead_times(&self) -> Vec<usize> {
        self.echelons.iter().map(|e| e.lead_time).collect()
    }

    pub fn max_lead_time(&self) -> usize {
        self.echelons.iter().map(|e| e.lead_time).max().unwrap_or(0)
    }

    /// Replace every echelon's costs by the normalised pair
    /// h = 1/(1+r), b = r/(1+r), so that h + b = 1 and b/h = r.
    pub fn with_normalized_costs(&self, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::invalid("bh_ratio", format!("{ratio} must be positive")));
        }
        let mut out = self.clone();
        for e in &mut out.echelons {
            e.holding_cost = 1.0 / (1.0 + ratio);
            e.backorder_cost = ratio / (1.0 + ratio);
        }
        out.validate()?;
        Ok(out)
    }

    /// Replace lead times, keeping costs and roles.
    pub fn with_lead_times(&self, lead_times: &[usize]) -> Result<Self> {
        if lead_times.len() != self.echelons.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} lead times for a {}-echelon chain",
                lead_times.len(),
                self.echelons.len()
            )));
        }
        let mut out = self.clone();
        for (e, &l) in out.echelons.iter_mut().zip(lead_times) {
            e.lead_time = l;
        }
        out.validate()?;
        Ok(out)
    }

    /// A chain of `k` echelons built by cycling through this chain's tiers.
    pub fn cycled(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("echelons", "must be at least 1"));
        }
        let echelons = (0..k)
            .map(|i| self.echelons[i % self.echelons.len()].clone())
            .collect();
        ChainConfig::new(&format!("{}_x{k}", self.name), echelons)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("chain config always serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let chain: ChainConfig = toml::from_str(text).map_err(|e| Error::parse("chain config", e))?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// One of the predefined chains.
///
/// `beer_game` and `consumer_2tier` cost parameters are toolkit defaults:
/// only their lead times and depth are fixed by the classic settings.
pub fn builtin_chain(name: &str) -> Result<ChainConfig> {
    let echelons = match name {
        "semiconductor_4tier" => vec![
            EchelonConfig::new("Distributor / OEM", 2, 0.15, 0.60),
            EchelonConfig::new("Assembly & Test (OSAT)", 4, 0.12, 0.50),
            EchelonConfig::new("Foundry / Fab", 12, 0.08, 0.40),
            EchelonConfig::new("Wafer / Material", 8, 0.05, 0.30),
        ],
        "beer_game" => ["Retailer", "Wholesaler", "Distributor", "Factory"]
            .iter()
            .map(|role| EchelonConfig::new(role, 2, 0.50, 1.00))
            .collect(),
        "consumer_2tier" => vec![
            EchelonConfig::new("Retailer", 1, 0.20, 0.80),
            EchelonConfig::new("Distributor", 2, 0.10, 0.40),
        ],
        _ => {
            return Err(Error::UnknownChain {
                name: name.to_string(),
                valid: BUILTIN_CHAINS.join(", "),
            })
        }
    };
    ChainConfig::new(name, echelons)
}
