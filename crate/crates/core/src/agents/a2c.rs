//! Synchronous advantage actor-critic.
//!
//! Actor loss per sample: `-log pi(a|s) * adv - beta * H(pi(.|s))`, with the
//! advantage held constant. Critic loss per sample: `adv^2`, differentiated
//! through both `V(s)` and `V(s')`.

use rand::Rng;

use super::{AgentError, Observation, Transition};
use crate::neural::{log_softmax, softmax, Activation, AdamConfig, AdamState, Mlp, ParamSet};
use crate::parallel::Execution;

/// `r + gamma * V(s') * (1 - done) - V(s)`.
pub fn a2c_advantage(reward: f64, v_s: f64, v_s_next: f64, done: bool, gamma: f64) -> f64 {
    let bootstrap = if done { 0.0 } else { gamma * v_s_next };
    reward + bootstrap - v_s
}

/// Entropy of a probability vector (natural log).
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2cLosses {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub actor_grad: Mlp,
    pub critic_grad: Mlp,
}

#[derive(Debug, Clone)]
pub struct A2cAgent {
    actor: Mlp,
    critic: Mlp,
    actor_opt: AdamState<Mlp>,
    critic_opt: AdamState<Mlp>,
    gamma: f64,
    entropy_beta: f64,
    execution: Execution,
}

impl A2cAgent {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        n_actions: usize,
        hidden: &[usize],
        adam: AdamConfig,
        gamma: f64,
        entropy_beta: f64,
        rng: &mut R,
    ) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![input_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let actor = Mlp::new(&sizes(n_actions), Activation::Identity, rng);
        let critic = Mlp::new(&sizes(1), Activation::Identity, rng);
        Self::from_networks(actor, critic, adam, gamma, entropy_beta)
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, adam: AdamConfig, gamma: f64, entropy_beta: f64) -> Self {
        Self {
            actor_opt: AdamState::new(&actor, adam),
            critic_opt: AdamState::new(&critic, adam),
            actor,
            critic,
            gamma,
            entropy_beta,
            execution: Execution::default(),
        }
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn entropy_beta(&self) -> f64 {
        self.entropy_beta
    }

    pub fn set_execution(&mut self, execution: Execution) {
        self.execution = execution;
    }

    /// `pi(.|s)`.
    pub fn policy(&self, input: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(softmax(&self.actor.predict(input)?))
    }

    /// `V(s)`.
    pub fn value(&self, input: &[f64]) -> Result<f64, AgentError> {
        Ok(self.critic.predict(input)?[0])
    }

    /// Samples an action index from `pi(.|s)`.
    pub fn sample_action<R: Rng + ?Sized>(&self, input: &[f64], rng: &mut R) -> Result<usize, AgentError> {
        let probs = self.policy(input)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(i);
            }
        }
        Ok(probs.len() - 1)
    }

    /// Both losses and their parameter gradients over a rollout.
    pub fn losses_and_gradients<O: Observation>(&self, rollout: &[Transition<O>]) -> Result<A2cLosses, AgentError> {
        if rollout.is_empty() {
            return Err(AgentError::EmptyRollout);
        }
        let n = rollout.len() as f64;
        let beta = self.entropy_beta;
        let gamma = self.gamma;
        let per_sample = self.execution.map(rollout, |t| -> Result<(f64, f64, Mlp, Mlp), AgentError> {
            let s = t.state.input();
            let (v_s, c_cache) = self.critic.forward(&s)?;
            let next = match (&t.next_state, t.done) {
                (Some(ns), false) => {
                    let (v, cache) = self.critic.forward(&ns.input())?;
                    Some((v[0], cache))
                }
                _ => None,
            };
            let v_next = next.as_ref().map(|(v, _)| *v).unwrap_or(0.0);
            let adv = a2c_advantage(t.reward, v_s[0], v_next, t.done, gamma);

            let (mut critic_grad, _) = self.critic.backward(&c_cache, &[-2.0 * adv / n])?;
            if let Some((_, cache)) = &next {
                let (g, _) = self.critic.backward(cache, &[2.0 * adv * gamma / n])?;
                critic_grad.add_scaled(&g, 1.0)?;
            }

            let (logits, a_cache) = self.actor.forward(&s)?;
            if t.action >= logits.len() {
                return Err(AgentError::InvalidAction(t.action));
            }
            let log_p = log_softmax(&logits);
            let p: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
            let h = -p.iter().zip(&log_p).map(|(pi, lp)| pi * lp).sum::<f64>();
            let dz: Vec<f64> = (0..logits.len())
                .map(|j| {
                    let onehot = if j == t.action { 1.0 } else { 0.0 };
                    (-adv * (onehot - p[j]) + beta * p[j] * (log_p[j] + h)) / n
                })
                .collect();
            let (actor_grad, _) = self.actor.backward(&a_cache, &dz)?;
            let actor_loss = -log_p[t.action] * adv - beta * h;
            Ok((actor_loss, adv * adv, actor_grad, critic_grad))
        });

        let mut out = A2cLosses {
            actor_loss: 0.0,
            critic_loss: 0.0,
            actor_grad: self.actor.zeros_like(),
            critic_grad: self.critic.zeros_like(),
        };
        for r in per_sample {
            let (la, lc, ga, gc) = r?;
            out.actor_loss += la;
            out.critic_loss += lc;
            out.actor_grad.add_scaled(&ga, 1.0)?;
            out.critic_grad.add_scaled(&gc, 1.0)?;
        }
        out.actor_loss /= n;
        out.critic_loss /= n;
        Ok(out)
    }

    /// One Adam step on each network; returns `(actor_loss, critic_loss)`
    /// measured before the step.
    pub fn a2c_train_step<O: Observation>(&mut self, rollout: &[Transition<O>]) -> Result<(f64, f64), AgentError> {
        let l = self.losses_and_gradients(rollout)?;
        self.actor_opt.step(&mut self.actor, &l.actor_grad)?;
        self.critic_opt.step(&mut self.critic, &l.critic_grad)?;
        Ok((l.actor_loss, l.critic_loss))
    }
}
