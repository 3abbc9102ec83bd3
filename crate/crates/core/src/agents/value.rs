//! Value-based learners: DQN, Double DQN and the dueling variant.

use rand::Rng;

use super::{AgentError, AgentKind, Observation, Transition};
use crate::neural::{argmax, AdamConfig, AdamState, DuelingNet, Mlp, Network, ParamSet, Activation};
use crate::parallel::Execution;

/// Samples per sequential gradient-accumulation chunk. Fixed so the summation
/// order (and therefore every bit of the result) is independent of threading.
const CHUNK: usize = 8;

/// `y = r` when `done`, else `r + gamma * max_a Q_target(s', a)`.
pub fn dqn_target(reward: f64, next_state: Option<&[f64]>, done: bool, target: &Network, gamma: f64) -> Result<f64, AgentError> {
    match next_state {
        Some(s) if !done => {
            let q = target.predict(s)?;
            Ok(reward + gamma * q[argmax(&q)])
        }
        _ => Ok(reward),
    }
}

/// `y = r` when `done`, else `r + gamma * Q_target(s', argmax_a Q_online(s', a))`:
/// the online network selects, the target network evaluates.
pub fn ddqn_target(reward: f64, next_state: Option<&[f64]>, done: bool, online: &Network, target: &Network, gamma: f64) -> Result<f64, AgentError> {
    match next_state {
        Some(s) if !done => {
            let chosen = argmax(&online.predict(s)?);
            Ok(reward + gamma * target.predict(s)?[chosen])
        }
        _ => Ok(reward),
    }
}

/// Online network θ, target snapshot θ′ and the optimizer for θ.
#[derive(Debug, Clone)]
pub struct QAgent {
    kind: AgentKind,
    online: Network,
    target: Network,
    optimizer: AdamState<Network>,
    gamma: f64,
    grad_steps: u64,
    execution: Execution,
}

impl QAgent {
    /// `hidden` are the trunk widths; the dueling variant adds two heads with
    /// one hidden layer of `head_hidden` each.
    pub fn new<R: Rng + ?Sized>(
        kind: AgentKind,
        input_dim: usize,
        n_actions: usize,
        hidden: &[usize],
        head_hidden: usize,
        adam: AdamConfig,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        let mut trunk = vec![input_dim];
        trunk.extend_from_slice(hidden);
        let online = match kind {
            AgentKind::Dqn | AgentKind::Ddqn => {
                trunk.push(n_actions);
                Network::Mlp(Mlp::new(&trunk, Activation::Identity, rng))
            }
            AgentKind::Dueling => {
                if hidden.is_empty() {
                    return Err(AgentError::InvalidConfig("dueling network needs a hidden trunk".into()));
                }
                Network::Dueling(DuelingNet::new(&trunk, head_hidden, n_actions, rng))
            }
            AgentKind::A2c => return Err(AgentError::NotApplicable("A2C is not a value-based agent")),
        };
        Ok(Self::from_networks(kind, online.clone(), online, adam, gamma))
    }

    pub fn from_networks(kind: AgentKind, online: Network, target: Network, adam: AdamConfig, gamma: f64) -> Self {
        let optimizer = AdamState::new(&online, adam);
        Self { kind, online, target, optimizer, gamma, grad_steps: 0, execution: Execution::default() }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn online(&self) -> &Network {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Network {
        &mut self.online
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    pub(crate) fn set_grad_steps(&mut self, n: u64) {
        self.grad_steps = n;
    }

    pub fn set_execution(&mut self, execution: Execution) {
        self.execution = execution;
    }

    pub fn q_values(&self, input: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.online.predict(input)?)
    }

    /// Regression target for one transition, by agent kind. The dueling agent
    /// uses the plain DQN target.
    pub fn target_value<O: Observation>(&self, t: &Transition<O>) -> Result<f64, AgentError> {
        let next = t.next_state.as_ref().map(|s| s.input());
        let next = next.as_deref();
        match self.kind {
            AgentKind::Ddqn => ddqn_target(t.reward, next, t.done, &self.online, &self.target, self.gamma),
            _ => dqn_target(t.reward, next, t.done, &self.target, self.gamma),
        }
    }

    /// Mean-squared TD loss over `batch` and its gradient with respect to θ.
    /// Targets are constants: no gradient reaches θ′.
    pub fn loss_and_gradient<O: Observation>(&self, batch: &[&Transition<O>]) -> Result<(f64, Network), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let chunks: Vec<&[&Transition<O>]> = batch.chunks(CHUNK).collect();
        let partials = self.execution.map(&chunks, |chunk| -> Result<(f64, Network), AgentError> {
            let mut loss = 0.0;
            let mut grad = self.online.zeros_like();
            for t in chunk.iter() {
                let y = self.target_value(t)?;
                let (q, cache) = self.online.forward(&t.state.input())?;
                if t.action >= q.len() {
                    return Err(AgentError::InvalidAction(t.action));
                }
                let err = q[t.action] - y;
                loss += err * err;
                let mut dq = vec![0.0; q.len()];
                dq[t.action] = 2.0 * err / n;
                let (g, _) = self.online.backward(&cache, &dq)?;
                grad.add_scaled(&g, 1.0)?;
            }
            Ok((loss, grad))
        });
        let mut loss = 0.0;
        let mut grad = self.online.zeros_like();
        for p in partials {
            let (l, g) = p?;
            loss += l;
            grad.add_scaled(&g, 1.0)?;
        }
        Ok((loss / n, grad))
    }

    /// One Adam step on the TD loss; returns the loss before the step.
    pub fn q_train_step<O: Observation>(&mut self, batch: &[&Transition<O>]) -> Result<f64, AgentError> {
        let (loss, grad) = self.loss_and_gradient(batch)?;
        self.optimizer.step(&mut self.online, &grad)?;
        self.grad_steps += 1;
        Ok(loss)
    }

    /// θ′ ← θ.
    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Replaces θ′ directly (tests and checkpoint restore).
    pub fn set_target(&mut self, target: Network) -> Result<(), AgentError> {
        self.online.check_same_shape(&target)?;
        self.target = target;
        Ok(())
    }
}
