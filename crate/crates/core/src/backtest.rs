//! Greedy replay of a fixed policy over held-out data.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError};
use crate::env::{EnvConfig, EnvError, TradeAction, TradingEnv};
use crate::features::{FeatureMatrix, StateWindow};
use crate::fmt::{round10, sig10};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BacktestError {
    #[error("empty series")]
    EmptySeries,
    #[error("series lengths differ: {wealth} wealth points for {actions} actions")]
    LengthMismatch { wealth: usize, actions: usize },
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

type Result<T> = std::result::Result<T, BacktestError>;

/// Anything that maps a state to a position.
pub trait Policy {
    fn name(&self) -> String;
    fn act(&mut self, state: &StateWindow) -> Result<TradeAction>;
}

impl Policy for Agent {
    fn name(&self) -> String {
        self.kind().to_string()
    }

    fn act(&mut self, state: &StateWindow) -> Result<TradeAction> {
        let i = self.greedy_action(&state.flatten())?;
        TradeAction::from_index(i).ok_or(BacktestError::Agent(AgentError::InvalidAction(i)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysLong;

impl Policy for AlwaysLong {
    fn name(&self) -> String {
        "always_long".into()
    }

    fn act(&mut self, _: &StateWindow) -> Result<TradeAction> {
        Ok(TradeAction::Buy)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysFlat;

impl Policy for AlwaysFlat {
    fn name(&self) -> String {
        "always_flat".into()
    }

    fn act(&mut self, _: &StateWindow) -> Result<TradeAction> {
        Ok(TradeAction::Hold)
    }
}

/// Uniform random positions from a seeded stream.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&mut self, _: &StateWindow) -> Result<TradeAction> {
        Ok(TradeAction::ALL[self.rng.gen_range(0..TradeAction::ALL.len())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_wealth: f64,
    pub total_return: f64,
    pub max_drawdown: f64,
    pub num_trades: usize,
    pub num_buy: usize,
    pub num_sell: usize,
    pub num_hold: usize,
}

/// One trading day: the position taken on `date` and what it earned by the next close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub action: TradeAction,
    pub reward: f64,
    pub wealth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub asset_id: String,
    pub agent: String,
    pub records: Vec<DayRecord>,
    /// `(date, wealth)`; the first point is the initial capital on the first
    /// decision day, each later point the wealth at that day's close.
    pub wealth: Vec<(NaiveDate, f64)>,
    pub summary: Summary,
}

impl BacktestReport {
    pub fn actions(&self) -> Vec<TradeAction> {
        self.records.iter().map(|r| r.action).collect()
    }

    pub fn wealth_values(&self) -> Vec<f64> {
        self.wealth.iter().map(|w| w.1).collect()
    }

    pub fn signals_csv(&self) -> String {
        let mut out = String::from("date,action\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{}", r.date.format("%Y-%m-%d"), r.action);
        }
        out
    }

    pub fn wealth_csv(&self) -> String {
        let mut out = String::from("date,wealth\n");
        for (d, w) in &self.wealth {
            let _ = writeln!(out, "{},{}", d.format("%Y-%m-%d"), sig10(*w));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let s = &self.summary;
        let doc = SummaryDoc {
            schema_version: SUMMARY_SCHEMA_VERSION,
            asset_id: &self.asset_id,
            agent: &self.agent,
            days: self.records.len(),
            final_wealth: round10(s.final_wealth),
            total_return: round10(s.total_return),
            max_drawdown: round10(s.max_drawdown),
            num_trades: s.num_trades,
            num_buy: s.num_buy,
            num_sell: s.num_sell,
            num_hold: s.num_hold,
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        text.push('\n');
        text
    }

    /// `final_wealth=… total_return=… max_drawdown=… trades=…`
    pub fn summary_line(&self) -> String {
        let s = &self.summary;
        format!(
            "final_wealth={} total_return={} max_drawdown={} trades={}",
            sig10(s.final_wealth),
            sig10(s.total_return),
            sig10(s.max_drawdown),
            s.num_trades
        )
    }
}

#[derive(Serialize, Deserialize)]
struct SummaryDoc<'a> {
    schema_version: u32,
    asset_id: &'a str,
    agent: &'a str,
    days: usize,
    final_wealth: f64,
    total_return: f64,
    max_drawdown: f64,
    num_trades: usize,
    num_buy: usize,
    num_sell: usize,
    num_hold: usize,
}

/// Steps `policy` through `features` exactly as in training, until the end
/// of data or ruin.
pub fn run_backtest<P: Policy + ?Sized>(policy: &mut P, features: Arc<FeatureMatrix>, config: &EnvConfig) -> Result<BacktestReport> {
    let asset_id = features.asset_id.clone();
    let (mut env, mut obs) = TradingEnv::new(Arc::clone(&features), config.clone())?;
    let dates = features.dates();
    let mut records = Vec::with_capacity(env.episode_len());
    let mut wealth = vec![(dates[env.state().t], config.initial_capital)];
    loop {
        let t = env.state().t;
        let action = policy.act(&obs)?;
        let step = env.step(action)?;
        records.push(DayRecord { date: dates[t], action, reward: step.reward, wealth: step.info.wealth });
        wealth.push((dates[t + 1], step.info.wealth));
        match step.observation {
            Some(o) if !step.done => obs = o,
            _ => break,
        }
    }
    let actions: Vec<TradeAction> = records.iter().map(|r| r.action).collect();
    let values: Vec<f64> = wealth.iter().map(|w| w.1).collect();
    let summary = compute_metrics(&values, &actions)?;
    Ok(BacktestReport { asset_id, agent: policy.name(), records, wealth, summary })
}

/// Summary statistics. `wealth` starts at the initial capital; when `actions`
/// is non-empty it has exactly one more point. Trades count position changes,
/// starting from flat.
pub fn compute_metrics(wealth: &[f64], actions: &[TradeAction]) -> Result<Summary> {
    if wealth.is_empty() {
        return Err(BacktestError::EmptySeries);
    }
    if !actions.is_empty() && wealth.len() != actions.len() + 1 {
        return Err(BacktestError::LengthMismatch { wealth: wealth.len(), actions: actions.len() });
    }
    let w0 = wealth[0];
    let last = *wealth.last().expect("non-empty");
    let mut peak = f64::NEG_INFINITY;
    let mut max_dd: f64 = 0.0;
    for &w in wealth {
        peak = peak.max(w);
        if peak > 0.0 {
            max_dd = max_dd.max((peak - w) / peak);
        }
    }
    let mut prev = TradeAction::Hold;
    let mut trades = 0;
    for &a in actions {
        if a != prev {
            trades += 1;
        }
        prev = a;
    }
    let count = |x: TradeAction| actions.iter().filter(|a| **a == x).count();
    Ok(Summary {
        final_wealth: last,
        total_return: last / w0 - 1.0,
        max_drawdown: max_dd.clamp(0.0, 1.0),
        num_trades: trades,
        num_buy: count(TradeAction::Buy),
        num_sell: count(TradeAction::Sell),
        num_hold: count(TradeAction::Hold),
    })
}

/// Writes `signals.csv`, `wealth.csv` and `summary.json` into `dir`
/// (created if missing). Nothing is written for an empty report.
pub fn emit_report(report: &BacktestReport, dir: &Path) -> Result<()> {
    if report.records.is_empty() || report.wealth.is_empty() {
        return Err(BacktestError::EmptySeries);
    }
    let io = |e: std::io::Error| BacktestError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("signals.csv"), report.signals_csv()).map_err(io)?;
    std::fs::write(dir.join("wealth.csv"), report.wealth_csv()).map_err(io)?;
    std::fs::write(dir.join("summary.json"), report.summary_json()).map_err(io)?;
    Ok(())
}
