//! Run configuration. One TOML file describes data sources, every model and
//! environment knob, and the experiment grid. Serializing a loaded config
//! writes every field, so a snapshot records the defaults that were in force.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use drltrade_core::agents::{AgentConfig, AgentKind};
use drltrade_core::env::EnvConfig;
use drltrade_core::features::FeatureConfig;
use drltrade_core::market_data::DEFAULT_TRAIN_FRACTION;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SEED_ENV: &str = "DRLTRADE_SEED";

/// Where one asset's daily bars come from: a local CSV or a download.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSource {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url_template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_fraction: f64,
    pub assets: Vec<AssetSource>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { train_fraction: DEFAULT_TRAIN_FRACTION, assets: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub agents: Vec<AgentKind>,
    pub seeds: Vec<u64>,
    /// Cells run concurrently (0 = one per core).
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { agents: AgentKind::ALL.to_vec(), seeds: vec![0], jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub env: EnvConfig,
    /// Template for every trained agent; `kind` and `seed` are overridden per cell.
    pub agent: AgentConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs"),
            data: DataConfig::default(),
            features: FeatureConfig::default(),
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses `path`; relative data paths and `out_dir` are resolved against
    /// the directory holding the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for a in &mut cfg.data.assets {
            if let Some(p) = &a.path {
                if p.is_relative() {
                    a.path = Some(base.join(p));
                }
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::input("config", m));
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return bad(format!("data.train_fraction {} outside (0, 1)", self.data.train_fraction));
        }
        for a in &self.data.assets {
            match (&a.path, &a.url_template) {
                (Some(p), None) => {
                    if !p.is_file() {
                        return bad(format!("asset {}: data file {} does not exist", a.id, p.display()));
                    }
                }
                (None, Some(_)) => {}
                _ => return bad(format!("asset {}: set exactly one of `path` or `url_template`", a.id)),
            }
        }
        if self.experiment.seeds.is_empty() {
            return bad("experiment.seeds must not be empty".into());
        }
        if self.experiment.agents.is_empty() {
            return bad("experiment.agents must not be empty".into());
        }
        if self.features.lookback != self.env.lookback {
            return bad(format!("features.lookback ({}) must equal env.lookback ({})", self.features.lookback, self.env.lookback));
        }
        self.features.validate().map_err(|e| CliError::input("features", e.to_string()))?;
        self.env.validate().map_err(|e| CliError::input("environment", e.to_string()))?;
        self.agent.validate().map_err(|e| CliError::input("agents", e.to_string()))?;
        Ok(())
    }
}

/// `flag`, else `$DRLTRADE_SEED`, else `fallback`.
pub fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::input("config", format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(fallback),
    }
}
