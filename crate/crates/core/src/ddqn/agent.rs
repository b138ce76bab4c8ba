//! Per-vehicle double-DQN agent: ε-greedy acting, the double-Q target, one
//! SGD step on the squared TD error and periodic target synchronization.

use rand::Rng;

use super::network::{argmax, QNetwork, QSample};
use super::replay::{Experience, ReplayBuffer};
use super::state::{ActionSpace, AgentState, StateNormalizer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `−[w1 · R_λ · T_fed + w2 · E]`.
pub fn reward<T: Scalar>(w1: T, w2: T, r_lambda: u64, t_fed: T, qe: T) -> T {
    let rounds = T::from_u64(r_lambda).expect("round count representable");
    -(w1 * (rounds * t_fed) + w2 * qe)
}

/// With probability `eps` a uniformly random action, otherwise the greedy one.
/// Exactly one uniform is drawn per call, plus one index draw when exploring.
pub fn act_epsilon_greedy<T: Scalar, R: Rng + ?Sized>(net: &QNetwork<T>, input: &[T], eps: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < eps {
        rng.random_range(0..net.output_dim())
    } else {
        argmax(&net.forward(input))
    }
}

/// Double-Q target `r + γ · Q(s', argmax_a Q(s', a; θ); θ')` together with
/// the action picked by the prediction network.
pub fn double_q_target<T: Scalar>(
    net: &QNetwork<T>,
    target_net: &QNetwork<T>,
    reward: T,
    next_input: &[T],
    gamma: T,
) -> (T, usize) {
    if gamma == T::zero() {
        return (reward, argmax(&net.forward(next_input)));
    }
    let a_star = argmax(&net.forward(next_input));
    let value = target_net.forward(next_input)[a_star];
    (reward + gamma * value, a_star)
}

pub fn target_value<T: Scalar>(
    net: &QNetwork<T>,
    target_net: &QNetwork<T>,
    e: &Experience<T>,
    normalizer: &StateNormalizer<T>,
    gamma: T,
) -> T {
    double_q_target(net, target_net, e.reward, &normalizer.normalize(&e.next_state), gamma).0
}

/// One gradient step on the batch's mean squared TD error. Returns the
/// loss before the update.
pub fn train_step<T: Scalar>(
    net: &mut QNetwork<T>,
    target_net: &QNetwork<T>,
    batch: &[Experience<T>],
    normalizer: &StateNormalizer<T>,
    gamma: T,
    lr: T,
) -> Result<T> {
    let inputs: Vec<[T; 3]> = batch.iter().map(|e| normalizer.normalize(&e.state)).collect();
    let targets: Vec<T> = batch.iter().map(|e| target_value(net, target_net, e, normalizer, gamma)).collect();
    let samples: Vec<QSample<'_, T>> = batch
        .iter()
        .zip(&inputs)
        .zip(&targets)
        .map(|((e, x), &y)| QSample { input: x, action: e.action, target: y })
        .collect();
    let (loss, grad) = net.loss_and_gradient(&samples);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { loss: loss.as_f64(), step: 0 });
    }
    net.apply_gradient(&grad, lr);
    Ok(loss)
}

pub fn sync_target<T: Scalar>(net: &QNetwork<T>, target_net: &mut QNetwork<T>) {
    target_net.copy_from(net);
}

/// ε schedule: constant, or linear decay to `min` over `decay_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub min: f64,
    pub decay_steps: Option<u64>,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self { start: eps, min: eps, decay_steps: None }
    }

    pub fn at(&self, step: u64) -> f64 {
        match self.decay_steps {
            None | Some(0) => self.start,
            Some(n) => {
                let frac = (step as f64 / n as f64).min(1.0);
                self.start + (self.min - self.start) * frac
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub sync_every: u64,
    pub buffer_capacity: usize,
    pub epsilon: EpsilonSchedule,
    pub hidden: Vec<usize>,
    /// Positive factor applied to rewards before they enter the buffer.
    pub reward_scale: f64,
}

/// Prediction and target networks plus the replay buffer of one vehicle.
#[derive(Debug, Clone)]
pub struct Agent<T: Scalar> {
    pub net: QNetwork<T>,
    pub target_net: QNetwork<T>,
    pub buffer: ReplayBuffer<T>,
    pub normalizer: StateNormalizer<T>,
    pub actions: ActionSpace,
    pub config: AgentConfig,
    steps: u64,
    updates: u64,
}

/// What one agent did with a newly stored transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnOutcome {
    pub loss: Option<f64>,
    pub synced: bool,
}

impl<T: Scalar> Agent<T> {
    pub fn new<R: Rng + ?Sized>(
        config: AgentConfig,
        actions: ActionSpace,
        normalizer: StateNormalizer<T>,
        rng: &mut R,
    ) -> Self {
        let net = QNetwork::new(3, &config.hidden, actions.len(), rng);
        let target_net = net.clone();
        Self {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            net,
            target_net,
            normalizer,
            actions,
            config,
            steps: 0,
            updates: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.at(self.steps)
    }

    pub fn input(&self, s: &AgentState<T>) -> [T; 3] {
        self.normalizer.normalize(s)
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &AgentState<T>, rng: &mut R) -> usize {
        act_epsilon_greedy(&self.net, &self.input(s), self.epsilon(), rng)
    }

    pub fn greedy(&self, s: &AgentState<T>) -> usize {
        argmax(&self.net.forward(&self.input(s)))
    }

    /// Stores the transition, then trains on a replayed mini-batch once the
    /// buffer holds at least `batch_size` transitions and syncs the target
    /// network every `sync_every` steps.
    pub fn observe<R: Rng + ?Sized>(&mut self, e: Experience<T>, rng: &mut R) -> Result<LearnOutcome> {
        let scaled = Experience { reward: e.reward * T::lit(self.config.reward_scale), ..e };
        self.buffer.store(scaled);
        self.steps += 1;
        let batch = match self.buffer.sample_minibatch(self.config.batch_size, rng) {
            Ok(b) => b,
            Err(Error::NotReady { .. }) => return Ok(LearnOutcome { loss: None, synced: false }),
            Err(e) => return Err(e),
        };
        let loss = train_step(
            &mut self.net,
            &self.target_net,
            &batch,
            &self.normalizer,
            T::lit(self.config.gamma),
            T::lit(self.config.lr),
        )
        .map_err(|err| match err {
            Error::NonFiniteLoss { loss, .. } => Error::NonFiniteLoss { loss, step: self.steps },
            other => other,
        })?;
        self.updates += 1;
        let synced = self.config.sync_every > 0 && self.steps.is_multiple_of(self.config.sync_every);
        if synced {
            sync_target(&self.net, &mut self.target_net);
        }
        Ok(LearnOutcome { loss: Some(loss.as_f64()), synced })
    }
}
