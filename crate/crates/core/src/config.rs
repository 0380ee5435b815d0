//! Run configuration: the JSON document shared by every command, and the
//! manifest that echoes it back.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::montecarlo::CycleStrategy;
use crate::risk_profile::RiskProfileParams;
use crate::solver::{GridSpec, SolveOptions};

pub const MANIFEST_VERSION: u32 = 1;

fn default_horizon() -> usize {
    36
}
fn default_regime() -> usize {
    1
}
fn default_paths() -> usize {
    10_000
}
fn default_wealth() -> f64 {
    1.0
}

/// Market keys sit at the top level; everything else is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub states: usize,
    pub transition: Vec<Vec<f64>>,
    pub risk_free: Vec<f64>,
    pub mean_return: Vec<f64>,
    pub vol_return: Vec<f64>,
    pub steps_per_year: u32,
    #[serde(default)]
    pub risk_profile: Option<RiskProfileParams>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// One-based.
    #[serde(default = "default_regime")]
    pub initial_regime: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_wealth")]
    pub initial_wealth: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub liquidation: bool,
    #[serde(default)]
    pub strategy: Option<CycleStrategy>,
    #[serde(default)]
    pub max_clamp_fraction: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        let v = if v.get("manifest_version").is_some() {
            v.get("config")
                .cloned()
                .ok_or_else(|| Error::InvalidParameter("manifest has no `config` key".into()))?
        } else {
            v
        };
        let cfg: RunConfig =
            serde_json::from_value(v).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> std::io::Result<std::result::Result<Self, Error>> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_json(&text))
    }

    pub fn market(&self) -> MarketParams {
        MarketParams {
            num_states: self.states,
            transition: self.transition.clone(),
            risk_free: self.risk_free.clone(),
            mean_return: self.mean_return.clone(),
            vol_return: self.vol_return.clone(),
            steps_per_year: self.steps_per_year,
        }
    }

    pub fn profile(&self) -> Result<RiskProfileParams> {
        self.risk_profile
            .clone()
            .ok_or_else(|| Error::InvalidParameter("missing key `risk_profile`".into()))
    }

    pub fn strategy(&self) -> Result<CycleStrategy> {
        self.strategy.ok_or_else(|| Error::InvalidParameter("missing key `strategy`".into()))
    }

    /// Zero-based initial regime.
    pub fn y0(&self) -> usize {
        self.initial_regime - 1
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { grid: self.grid.clone(), bounds: self.bounds, max_clamp_fraction: self.max_clamp_fraction }
    }

    pub fn validate(&self) -> Result<()> {
        let market = self.market();
        market.validate()?;
        if self.initial_regime == 0 || self.initial_regime > self.states {
            return Err(Error::InvalidParameter(format!(
                "initial_regime must lie in 1..={}, got {}",
                self.states, self.initial_regime
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if !(self.initial_wealth > 0.0) {
            return Err(Error::InvalidParameter("initial_wealth must be positive".into()));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo <= hi) {
                return Err(Error::InvalidParameter("bounds need lower <= upper".into()));
            }
        }
        if let Some(p) = &self.risk_profile {
            p.validate(self.horizon, self.states)?;
        }
        if let Some(s) = &self.strategy {
            s.validate()?;
        }
        self.grid.validate()
    }

    /// SHA-256 of the canonical JSON serialization, lowercase hex.
    pub fn params_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Record written next to every command's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    /// Command arguments after flag resolution.
    pub args: serde_json::Value,
    pub params_hash: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, args: serde_json::Value, config: &RunConfig, outputs: Vec<String>) -> Self {
        Manifest {
            manifest_version: MANIFEST_VERSION,
            command: command.into(),
            args,
            params_hash: config.params_hash(),
            config: config.clone(),
            outputs,
        }
    }
}
