//! The ingest → features → train → backtest chain shared by every command.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use drltrade_core::agents::{self, Agent, AgentConfig, TrainingLog};
use drltrade_core::backtest::{emit_report, run_backtest, BacktestReport, Policy};
use drltrade_core::env::{EnvConfig, TradingEnv};
use drltrade_core::features::{build_features, FeatureConfig, FeatureMatrix, N_FEATURES};
use drltrade_core::market_data::{chronological_split, fetch_csv, parse_csv, DateRange, ParsedSeries, PriceSeries};

use crate::config::{AssetSource, RunConfig};
use crate::error::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOG_FILE: &str = "training_log.csv";
pub const SNAPSHOT_FILE: &str = "config.toml";

/// Reads and validates a local CSV.
pub fn read_csv(asset_id: &str, path: &Path) -> Result<ParsedSeries, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input("market_data", format!("{}: {e}", path.display())))?;
    parse_csv(asset_id, &text).map_err(|e| CliError::input("market_data", format!("{}: {e}", path.display())))
}

pub fn load_asset(source: &AssetSource) -> Result<ParsedSeries, CliError> {
    match (&source.path, &source.url_template) {
        (Some(p), _) => read_csv(&source.id, p),
        (None, Some(t)) => {
            let range = match (source.start, source.end) {
                (Some(start), Some(end)) => Some(DateRange { start, end }),
                _ => None,
            };
            let text = fetch_csv(t, &source.id, range).map_err(|e| CliError::from_core(e.into()))?;
            Ok(parse_csv(&source.id, &text).map_err(|e| CliError::from_core(e.into()))?)
        }
        (None, None) => Err(CliError::input("config", format!("asset {} has no data source", source.id))),
    }
}

/// Asset name from a file path: `data/BTC-USD.csv` → `BTC-USD`.
pub fn asset_id_from_path(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "asset".into())
}

/// Features over the whole history, cut into train and test matrices at the
/// chronological split. The test matrix carries `lookback - 1` rows of
/// context so its first decision falls on the first test day.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub asset_id: String,
    pub bars: usize,
    pub train_bars: usize,
    pub full: Arc<FeatureMatrix>,
    pub train: Arc<FeatureMatrix>,
    pub test: Arc<FeatureMatrix>,
}

pub fn prepare(series: &PriceSeries, features: &FeatureConfig, train_fraction: f64) -> Result<Prepared, CliError> {
    let (train_series, _) = chronological_split(series, train_fraction).map_err(|e| CliError::from_core(e.into()))?;
    let full = build_features(series, features).map_err(|e| CliError::from_core(e.into()))?;
    let (train, test) = full
        .split_at_series_index(train_series.len(), features.lookback)
        .map_err(|e| CliError::from_core(e.into()))?;
    Ok(Prepared {
        asset_id: series.asset_id.clone(),
        bars: series.len(),
        train_bars: train_series.len(),
        full: Arc::new(full),
        train: Arc::new(train),
        test: Arc::new(test),
    })
}

pub fn train_agent(data: &Arc<FeatureMatrix>, env: &EnvConfig, agent: &AgentConfig) -> Result<(Agent, TrainingLog), CliError> {
    let factory = || Ok(TradingEnv::new(Arc::clone(data), env.clone())?);
    agents::train(factory, agent).map_err(CliError::runtime_from)
}

/// Writes checkpoint, training log and config snapshot into `dir`.
pub fn save_training(dir: &Path, agent: &Agent, log: &TrainingLog, snapshot: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io("train", dir, e))?;
    agent.save(&dir.join(CHECKPOINT_FILE)).map_err(CliError::runtime_from)?;
    write(dir.join(LOG_FILE), log.to_csv())?;
    write(dir.join(SNAPSHOT_FILE), snapshot.to_toml())
}

pub fn write(path: PathBuf, text: String) -> Result<(), CliError> {
    std::fs::write(&path, text).map_err(|e| CliError::io("output", &path, e))
}

/// Rejects a checkpoint whose input width does not match `lookback x 7` states.
pub fn check_agent_shape(agent: &Agent, lookback: usize) -> Result<(), CliError> {
    let expected = lookback * N_FEATURES;
    if agent.input_dim() != expected {
        return Err(CliError::runtime(
            "backtest",
            format!(
                "checkpoint expects {} inputs but the data produces {lookback} x {N_FEATURES} = {expected}",
                agent.input_dim()
            ),
        ));
    }
    Ok(())
}

pub fn backtest<P: Policy + ?Sized>(policy: &mut P, data: &Arc<FeatureMatrix>, env: &EnvConfig) -> Result<BacktestReport, CliError> {
    run_backtest(policy, Arc::clone(data), env).map_err(CliError::runtime_from)
}

pub fn write_report(report: &BacktestReport, dir: &Path) -> Result<(), CliError> {
    emit_report(report, dir).map_err(CliError::runtime_from)
}

/// `<out>/<asset>/<agent>/seed-<n>`.
pub fn cell_dir(out: &Path, asset: &str, agent: &str, seed: u64) -> PathBuf {
    out.join(asset).join(agent).join(format!("seed-{seed}"))
}
