//! The four learners and their shared machinery.
//!
//! Action indices follow [`TradeAction::ALL`]: `0 = -1 (sell)`, `1 = 0 (hold)`,
//! `2 = +1 (buy)`. The learners themselves are generic in the number of
//! actions and the input width.

pub mod a2c;
pub mod exploration;
pub mod replay;
pub mod train;
pub mod value;

use std::borrow::Cow;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use a2c::{a2c_advantage, A2cAgent};
pub use exploration::{epsilon_greedy, EpsilonSchedule};
pub use replay::ReplayBuffer;
pub use train::{train, EpisodeLog, TrainingLog};
pub use value::{ddqn_target, dqn_target, QAgent};

use crate::env::{EnvError, TradeAction};
use crate::features::{StateWindow, N_FEATURES};
use crate::neural::{argmax, AdamConfig, Mlp, Network, NeuralError};
use crate::parallel::Execution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty rollout")]
    EmptyRollout,
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("action index {0} out of range")]
    InvalidAction(usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    Ddqn,
    Dueling,
    A2c,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Dqn, AgentKind::Ddqn, AgentKind::Dueling, AgentKind::A2c];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Ddqn => "ddqn",
            AgentKind::Dueling => "dueling",
            AgentKind::A2c => "a2c",
        }
    }

    pub fn is_value_based(self) -> bool {
        self != AgentKind::A2c
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, AgentError> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AgentError::InvalidConfig(format!("unknown agent `{s}` (expected dqn, ddqn, dueling or a2c)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Hard θ′ ← θ copy every this many gradient steps.
    pub target_sync_every: u64,
    /// Environment steps between gradient steps.
    pub train_every: usize,
    /// Buffer size before the first gradient step (at least `batch_size`).
    pub learning_starts: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub dueling_head_hidden: usize,
    /// Optimizer for value-based agents.
    pub value_adam: AdamConfig,
    /// Optimizer for both A2C networks.
    pub a2c_adam: AdamConfig,
    pub entropy_beta: f64,
    pub n_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            kind: AgentKind::Dqn,
            gamma: 0.99,
            epsilon: EpsilonSchedule::default(),
            batch_size: 64,
            buffer_capacity: 50_000,
            target_sync_every: 500,
            train_every: 1,
            learning_starts: 64,
            episodes: 20,
            seed: 0,
            hidden: vec![64, 64],
            dueling_head_hidden: 32,
            value_adam: AdamConfig { lr: 1e-4, ..AdamConfig::default() },
            a2c_adam: AdamConfig { lr: 3e-4, ..AdamConfig::default() },
            entropy_beta: 0.01,
            n_steps: 16,
        }
    }
}

impl AgentConfig {
    pub fn for_kind(kind: AgentKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1]");
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) || e.end > e.start {
            return bad("epsilon schedule needs 0 <= end <= start <= 1");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.train_every == 0 || self.n_steps == 0 {
            return bad("batch_size, buffer_capacity, train_every and n_steps must be positive");
        }
        if self.kind == AgentKind::Dueling && self.hidden.is_empty() {
            return bad("dueling network needs at least one hidden layer");
        }
        if self.entropy_beta < 0.0 {
            return bad("entropy_beta must be >= 0");
        }
        Ok(())
    }
}

/// Anything that can be fed to a network.
pub trait Observation: Clone + Send + Sync {
    fn input(&self) -> Cow<'_, [f64]>;
}

impl Observation for StateWindow {
    fn input(&self) -> Cow<'_, [f64]> {
        Cow::Owned(self.flatten())
    }
}

impl Observation for Vec<f64> {
    fn input(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(self)
    }
}

/// One `(s, a, r, s', done)` experience. `next_state` is `None` exactly when `done`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<O> {
    pub state: O,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<O>,
    pub done: bool,
}

impl<O> Transition<O> {
    pub fn new(state: O, action: usize, reward: f64, next_state: Option<O>, done: bool) -> Self {
        Self { state, action, reward, next_state: if done { None } else { next_state }, done }
    }
}

#[derive(Debug, Clone)]
enum Learner {
    Value(QAgent),
    ActorCritic(A2cAgent),
}

/// A configured learner of any kind plus its input/output shape.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    input_dim: usize,
    n_actions: usize,
    learner: Learner,
}

impl Agent {
    /// Freshly initialised agent; weights are drawn from `config.seed`.
    pub fn new(config: AgentConfig, input_dim: usize, n_actions: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let learner = match config.kind {
            AgentKind::A2c => Learner::ActorCritic(A2cAgent::new(
                input_dim,
                n_actions,
                &config.hidden,
                config.a2c_adam,
                config.gamma,
                config.entropy_beta,
                &mut rng,
            )),
            kind => Learner::Value(QAgent::new(
                kind,
                input_dim,
                n_actions,
                &config.hidden,
                config.dueling_head_hidden,
                config.value_adam,
                config.gamma,
                &mut rng,
            )?),
        };
        Ok(Self { config, input_dim, n_actions, learner })
    }

    /// Agent over flattened `lookback x 7` trading states with three actions.
    pub fn for_trading(config: AgentConfig, lookback: usize) -> Result<Self, AgentError> {
        Self::new(config, lookback * N_FEATURES, TradeAction::ALL.len())
    }

    pub fn kind(&self) -> AgentKind {
        self.config.kind
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn as_value(&self) -> Option<&QAgent> {
        match &self.learner {
            Learner::Value(q) => Some(q),
            Learner::ActorCritic(_) => None,
        }
    }

    pub fn as_value_mut(&mut self) -> Option<&mut QAgent> {
        match &mut self.learner {
            Learner::Value(q) => Some(q),
            Learner::ActorCritic(_) => None,
        }
    }

    pub fn as_a2c(&self) -> Option<&A2cAgent> {
        match &self.learner {
            Learner::ActorCritic(a) => Some(a),
            Learner::Value(_) => None,
        }
    }

    pub fn as_a2c_mut(&mut self) -> Option<&mut A2cAgent> {
        match &mut self.learner {
            Learner::ActorCritic(a) => Some(a),
            Learner::Value(_) => None,
        }
    }

    pub fn set_execution(&mut self, execution: Execution) {
        match &mut self.learner {
            Learner::Value(q) => q.set_execution(execution),
            Learner::ActorCritic(a) => a.set_execution(execution),
        }
    }

    /// θ′ ← θ. Fails for A2C, which has no target network.
    pub fn sync_target(&mut self) -> Result<(), AgentError> {
        match &mut self.learner {
            Learner::Value(q) => {
                q.sync_target();
                Ok(())
            }
            Learner::ActorCritic(_) => Err(AgentError::NotApplicable("A2C has no target network")),
        }
    }

    /// Current exploration rate (0 for A2C).
    pub fn epsilon(&self) -> f64 {
        match &self.learner {
            Learner::Value(q) => self.config.epsilon.value(q.grad_steps()),
            Learner::ActorCritic(_) => 0.0,
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<(), AgentError> {
        if input.len() != self.input_dim {
            return Err(AgentError::Neural(NeuralError::ShapeMismatch {
                what: "agent input (lookback x features)",
                expected: self.input_dim,
                got: input.len(),
            }));
        }
        Ok(())
    }

    /// Deterministic action: argmax Q for value agents, argmax pi for A2C.
    pub fn greedy_action(&self, input: &[f64]) -> Result<usize, AgentError> {
        self.check_input(input)?;
        let scores = match &self.learner {
            Learner::Value(q) => q.q_values(input)?,
            Learner::ActorCritic(a) => a.policy(input)?,
        };
        Ok(argmax(&scores))
    }

    pub fn to_checkpoint(&self) -> AgentCheckpoint {
        let networks = match &self.learner {
            Learner::Value(q) => CheckpointNetworks::Value { online: q.online().clone(), target: q.target().clone() },
            Learner::ActorCritic(a) => CheckpointNetworks::ActorCritic { actor: a.actor().clone(), critic: a.critic().clone() },
        };
        AgentCheckpoint {
            format_version: AGENT_CHECKPOINT_VERSION,
            config: self.config.clone(),
            input_dim: self.input_dim,
            n_actions: self.n_actions,
            grad_steps: self.as_value().map(QAgent::grad_steps).unwrap_or(0),
            epsilon: self.epsilon(),
            networks,
        }
    }

    pub fn from_checkpoint(ck: AgentCheckpoint) -> Result<Self, AgentError> {
        if ck.format_version != AGENT_CHECKPOINT_VERSION {
            return Err(AgentError::InvalidCheckpoint(format!("unsupported format_version {}", ck.format_version)));
        }
        ck.config.validate()?;
        let cfg = &ck.config;
        let learner = match (cfg.kind, ck.networks) {
            (AgentKind::A2c, CheckpointNetworks::ActorCritic { actor, critic }) => {
                actor.check()?;
                critic.check()?;
                if actor.input_dim() != ck.input_dim || actor.output_dim() != ck.n_actions || critic.input_dim() != ck.input_dim {
                    return Err(AgentError::InvalidCheckpoint("network shapes disagree with header".into()));
                }
                Learner::ActorCritic(A2cAgent::from_networks(actor, critic, cfg.a2c_adam, cfg.gamma, cfg.entropy_beta))
            }
            (kind, CheckpointNetworks::Value { online, target }) if kind.is_value_based() => {
                online.check()?;
                if online.input_dim() != ck.input_dim || online.output_dim() != ck.n_actions {
                    return Err(AgentError::InvalidCheckpoint("network shapes disagree with header".into()));
                }
                let dueling = matches!(online, Network::Dueling(_));
                if dueling != (kind == AgentKind::Dueling) {
                    return Err(AgentError::InvalidCheckpoint("architecture does not match agent kind".into()));
                }
                let mut q = QAgent::from_networks(kind, online, target.clone(), cfg.value_adam, cfg.gamma);
                q.set_target(target)?;
                q.set_grad_steps(ck.grad_steps);
                Learner::Value(q)
            }
            _ => return Err(AgentError::InvalidCheckpoint("networks do not match agent kind".into())),
        };
        Ok(Self { config: ck.config, input_dim: ck.input_dim, n_actions: ck.n_actions, learner })
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        std::fs::write(path, self.to_checkpoint().to_json()).map_err(|e| AgentError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Io(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(AgentCheckpoint::from_json(&text)?)
    }
}

pub const AGENT_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum CheckpointNetworks {
    Value { online: Network, target: Network },
    ActorCritic { actor: Mlp, critic: Mlp },
}

/// Versioned agent file: networks, config and exploration position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format_version: u32,
    pub config: AgentConfig,
    pub input_dim: usize,
    pub n_actions: usize,
    pub grad_steps: u64,
    pub epsilon: f64,
    pub networks: CheckpointNetworks,
}

impl AgentCheckpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        serde_json::from_str(text).map_err(|e| AgentError::InvalidCheckpoint(e.to_string()))
    }
}
