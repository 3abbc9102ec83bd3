//! The trading MDP.
//!
//! At day `t` the agent picks a position `A(t) ∈ {-1, 0, 1}` (full wealth
//! short, flat, or long) and earns the next-day return:
//!
//! ```text
//! R(t) = r(t) * A(t) - |A(t) - A(t-1)| * C,   r(t) = p(t+1) / p(t) - 1
//! W    <- W * (1 + R(t))
//! ```
//!
//! An episode ends either on ruin (wealth falls to `1 - drawdown_threshold`
//! of the initial capital; the step reward is replaced by `ruin_penalty`) or
//! at the end of data (the step reward gets `multiplier * (W / W0 - 1)` added).

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{build_state, FeatureError, FeatureMatrix, StateWindow};
use crate::fmt::sig10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called on a finished episode")]
    SteppedAfterDone,
    #[error("insufficient history: needed {needed} feature rows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("invalid action value {0}")]
    InvalidAction(i64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

type Result<T> = std::result::Result<T, EnvError>;

/// Position for the next day: short, flat or long.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum TradeAction {
    Sell,
    #[default]
    Hold,
    Buy,
}

impl TradeAction {
    /// Network output index order.
    pub const ALL: [TradeAction; 3] = [TradeAction::Sell, TradeAction::Hold, TradeAction::Buy];

    pub fn value(self) -> i64 {
        match self {
            TradeAction::Sell => -1,
            TradeAction::Hold => 0,
            TradeAction::Buy => 1,
        }
    }

    pub fn index(self) -> usize {
        (self.value() + 1) as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl TryFrom<i64> for TradeAction {
    type Error = EnvError;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(TradeAction::Sell),
            0 => Ok(TradeAction::Hold),
            1 => Ok(TradeAction::Buy),
            other => Err(EnvError::InvalidAction(other)),
        }
    }
}

impl From<TradeAction> for i64 {
    fn from(a: TradeAction) -> i64 {
        a.value()
    }
}

impl std::fmt::Display for TradeAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Transaction cost per unit of position change, as a fraction (2 bp = 0.0002).
    pub cost_bps: f64,
    /// Allowed range for `cost_bps`; `None` disables the check.
    pub cost_bounds: Option<(f64, f64)>,
    pub initial_capital: f64,
    /// Fraction of initial capital whose loss ends the episode.
    pub drawdown_threshold: f64,
    pub ruin_penalty: f64,
    pub terminal_multiplier: f64,
    /// Multiplier applied instead when the final return is negative.
    pub negative_terminal_multiplier: f64,
    pub lookback: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            cost_bps: 0.0002,
            cost_bounds: Some((0.0001, 0.0005)),
            initial_capital: 100_000.0,
            drawdown_threshold: 0.70,
            ruin_penalty: -10.0,
            terminal_multiplier: 10.0,
            negative_terminal_multiplier: 10.0,
            lookback: crate::features::DEFAULT_LOOKBACK,
        }
    }
}

impl EnvConfig {
    /// Default config with a cost outside the default bounds allowed.
    pub fn with_cost(cost: f64) -> Self {
        Self { cost_bps: cost, cost_bounds: None, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if !(self.cost_bps >= 0.0 && self.cost_bps < 1.0) {
            return bad(format!("cost {} outside [0, 1)", self.cost_bps));
        }
        if let Some((lo, hi)) = self.cost_bounds {
            if self.cost_bps < lo || self.cost_bps > hi {
                return bad(format!("cost {} outside configured bounds [{lo}, {hi}]", self.cost_bps));
            }
        }
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return bad("initial_capital must be positive".into());
        }
        if !(self.drawdown_threshold > 0.0 && self.drawdown_threshold < 1.0) {
            return bad("drawdown_threshold must be in (0, 1)".into());
        }
        if self.lookback == 0 {
            return bad("lookback must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// Feature-row index of the current day.
    pub t: usize,
    pub wealth: f64,
    pub prev_action: TradeAction,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EndOfData,
    Ruin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub wealth: f64,
    pub raw_return: f64,
    /// `|A(t) - A(t-1)| * C`, as a fraction of wealth.
    pub trade_cost: f64,
    /// Feature-row index of the decision day.
    pub t: usize,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Option<StateWindow>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// `sum_k gamma^k R_{k+1}` over a finite reward sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// A single-writer episode over a feature matrix.
#[derive(Debug, Clone)]
pub struct TradingEnv {
    features: Arc<FeatureMatrix>,
    config: EnvConfig,
    state: EnvState,
}

impl TradingEnv {
    /// Creates the environment and resets it; returns the first observation.
    pub fn new(features: Arc<FeatureMatrix>, config: EnvConfig) -> Result<(Self, StateWindow)> {
        config.validate()?;
        let mut env = TradingEnv {
            features,
            state: EnvState { t: 0, wealth: config.initial_capital, prev_action: TradeAction::Hold, done: true },
            config,
        };
        let obs = env.reset()?;
        Ok((env, obs))
    }

    /// Fewest feature rows that allow one state plus one forward return.
    pub fn min_rows(&self) -> usize {
        self.config.lookback + 1
    }

    pub fn reset(&mut self) -> Result<StateWindow> {
        if self.features.len() < self.min_rows() {
            return Err(EnvError::InsufficientHistory { needed: self.min_rows(), got: self.features.len() });
        }
        let t = self.config.lookback - 1;
        self.state = EnvState { t, wealth: self.config.initial_capital, prev_action: TradeAction::Hold, done: false };
        Ok(build_state(&self.features, t, self.config.lookback)?)
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn features(&self) -> &Arc<FeatureMatrix> {
        &self.features
    }

    /// Number of steps in a full (non-ruined) episode.
    pub fn episode_len(&self) -> usize {
        self.features.len().saturating_sub(self.config.lookback)
    }

    pub fn step(&mut self, action: TradeAction) -> Result<StepResult> {
        if self.state.done {
            return Err(EnvError::SteppedAfterDone);
        }
        let cfg = &self.config;
        let t = self.state.t;
        let prices = self.features.prices();
        let raw_return = prices[t + 1] / prices[t] - 1.0;
        let position = action.value() as f64;
        let trade_cost = (action.value() - self.state.prev_action.value()).abs() as f64 * cfg.cost_bps;
        let running = raw_return * position - trade_cost;
        let wealth = self.state.wealth * (1.0 + running);

        let last = self.features.len() - 1;
        let (reward, termination) = if wealth <= (1.0 - cfg.drawdown_threshold) * cfg.initial_capital {
            (cfg.ruin_penalty, Some(Termination::Ruin))
        } else if t + 1 == last {
            let ret = wealth / cfg.initial_capital - 1.0;
            let mult = if ret < 0.0 { cfg.negative_terminal_multiplier } else { cfg.terminal_multiplier };
            (running + mult * ret, Some(Termination::EndOfData))
        } else {
            (running, None)
        };

        let done = termination.is_some();
        self.state = EnvState { t: if done { t } else { t + 1 }, wealth, prev_action: action, done };
        let observation = if done { None } else { Some(build_state(&self.features, t + 1, cfg.lookback)?) };
        Ok(StepResult { observation, reward, done, info: StepInfo { wealth, raw_return, trade_cost, t, termination } })
    }
}

/// One row of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub date: chrono::NaiveDate,
    pub action: TradeAction,
    pub reward: f64,
    pub wealth: f64,
    pub raw_return: f64,
}

/// `date,action,reward,wealth,r_t`, 10 significant digits.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("date,action,reward,wealth,r_t\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.date.format("%Y-%m-%d"),
            r.action,
            sig10(r.reward),
            sig10(r.wealth),
            sig10(r.raw_return)
        );
    }
    out
}
