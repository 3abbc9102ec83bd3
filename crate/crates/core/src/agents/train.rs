//! Episode loops. One episode is one full pass over the environment's data.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{epsilon_greedy, Agent, AgentError, ReplayBuffer, Transition};
use crate::env::{TradeAction, TradingEnv};
use crate::features::StateWindow;
use crate::fmt::sig10;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub total_reward: f64,
    pub final_wealth: f64,
    /// Exploration rate at episode end (0 for A2C).
    pub epsilon: f64,
    /// Mean per-update loss (actor + critic for A2C); `None` if no update ran.
    pub mean_loss: Option<f64>,
    pub updates: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingLog {
    /// `episode,total_reward,final_wealth,epsilon,mean_loss`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,total_reward,final_wealth,epsilon,mean_loss\n");
        for e in &self.episodes {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.episode,
                sig10(e.total_reward),
                sig10(e.final_wealth),
                sig10(e.epsilon),
                e.mean_loss.map(sig10).unwrap_or_default()
            );
        }
        out
    }
}

fn action_of(index: usize) -> std::result::Result<TradeAction, AgentError> {
    TradeAction::from_index(index).ok_or(AgentError::InvalidAction(index))
}

/// Trains a fresh agent for `config.episodes` episodes. `env_factory` must
/// return a freshly reset environment and its first observation.
///
/// Value agents insert every step into a replay buffer, take a gradient step
/// every `train_every` steps once `learning_starts` items are stored, and
/// hard-sync the target every `target_sync_every` gradient steps. A2C trains
/// on consecutive `n_steps` rollouts (shorter at episode end).
pub fn train<F>(env_factory: F, config: &super::AgentConfig) -> Result<(Agent, TrainingLog)>
where
    F: Fn() -> Result<(TradingEnv, StateWindow)>,
{
    let (probe, _) = env_factory()?;
    let mut agent = Agent::for_trading(config.clone(), probe.config().lookback)?;
    drop(probe);
    let log = continue_training(&mut agent, env_factory, config.episodes)?;
    Ok((agent, log))
}

/// Runs `episodes` more training episodes on an existing agent.
pub fn continue_training<F>(agent: &mut Agent, env_factory: F, episodes: usize) -> Result<TrainingLog>
where
    F: Fn() -> Result<(TradingEnv, StateWindow)>,
{
    let cfg = agent.config().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut log = TrainingLog::default();
    let mut buffer: ReplayBuffer<Transition<StateWindow>> = ReplayBuffer::new(cfg.buffer_capacity);
    let mut env_steps = 0usize;

    for episode in 0..episodes {
        let (mut env, mut obs) = env_factory()?;
        let mut total = 0.0;
        let mut losses = Vec::new();
        let mut rollout: Vec<Transition<StateWindow>> = Vec::with_capacity(cfg.n_steps);
        loop {
            let input = obs.flatten();
            let action = if let Some(q) = agent.as_value() {
                epsilon_greedy(&q.q_values(&input)?, agent.epsilon(), &mut rng)
            } else {
                agent.as_a2c().expect("a2c").sample_action(&input, &mut rng)?
            };
            let step = env.step(action_of(action)?)?;
            total += step.reward;
            env_steps += 1;
            let next = step.observation.clone();
            let transition = Transition::new(obs, action, step.reward, next.clone(), step.done);

            if let Some(q) = agent.as_value_mut() {
                buffer.push(transition);
                if buffer.len() >= cfg.learning_starts.max(cfg.batch_size) && env_steps.is_multiple_of(cfg.train_every) {
                    let batch = buffer.sample(cfg.batch_size, &mut rng);
                    losses.push(q.q_train_step(&batch)?);
                    if cfg.target_sync_every > 0 && q.grad_steps() % cfg.target_sync_every == 0 {
                        q.sync_target();
                    }
                }
            } else {
                rollout.push(transition);
                if rollout.len() == cfg.n_steps || step.done {
                    let a2c = agent.as_a2c_mut().expect("a2c");
                    let (la, lc) = a2c.a2c_train_step(&rollout)?;
                    losses.push(la + lc);
                    rollout.clear();
                }
            }

            match next {
                Some(o) if !step.done => obs = o,
                _ => break,
            }
        }
        let mean_loss = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        log.episodes.push(EpisodeLog {
            episode,
            total_reward: total,
            final_wealth: env.state().wealth,
            epsilon: agent.epsilon(),
            mean_loss,
            updates: losses.len(),
        });
    }
    Ok(log)
}

/// Undiscounted episode reward of the greedy policy on a fresh environment.
pub fn greedy_episode_reward(agent: &Agent, env: &mut TradingEnv) -> Result<f64> {
    let mut obs = env.reset()?;
    let mut total = 0.0;
    loop {
        let a = agent.greedy_action(&obs.flatten())?;
        let step = env.step(action_of(a)?)?;
        total += step.reward;
        match step.observation {
            Some(o) if !step.done => obs = o,
            _ => return Ok(total),
        }
    }
}
