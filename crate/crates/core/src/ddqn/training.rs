//! Episode loops: the training stage (ε-greedy acting, replay, learning) and
//! the greedy testing stage.

use super::agent::{act_epsilon_greedy, Agent};
use super::network::argmax;
use super::replay::Experience;
use super::state::AgentState;
use crate::error::Result;
use crate::rng::{Phase, Purpose, SeedTree, SimRng};
use crate::scalar::Scalar;

/// What a vehicle's controller sees when it must pick a level.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a, T: Scalar> {
    pub vehicle: usize,
    pub state: AgentState<T>,
    /// Global losses of the earlier rounds of this episode.
    pub loss_history: &'a [T],
}

/// One vehicle's transition from one step, with the unscaled reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T: Scalar> {
    pub vehicle: usize,
    pub experience: Experience<T>,
}

/// A multi-vehicle environment in which one step is one FL round.
pub trait Environment<T: Scalar> {
    fn vehicles(&self) -> usize;

    /// Starts a fresh episode; randomness is keyed by `(phase, episode)`.
    fn reset(&mut self, phase: Phase, episode: u64) -> Result<()>;

    /// Runs one round. `decide` is called once per participating vehicle and
    /// returns an action index.
    fn step(&mut self, decide: &mut dyn FnMut(&DecisionContext<'_, T>) -> usize) -> Result<Vec<Transition<T>>>;
}

/// Chooses actions for every vehicle of an episode.
pub trait Controller<T: Scalar> {
    fn begin_episode(&mut self, phase: Phase, episode: u64);
    fn decide(&mut self, ctx: &DecisionContext<'_, T>) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub episode: u64,
    pub mean_reward: f64,
    /// NaN when no gradient update happened during the episode.
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub curve: Vec<CurveRow>,
    pub updates: u64,
}

/// Training stage: `episodes` episodes of `steps` rounds each. Every
/// transition is stored in its vehicle's buffer and followed by a learning
/// step once the buffer is large enough.
pub fn run_training<T: Scalar, E: Environment<T> + ?Sized>(
    env: &mut E,
    agents: &mut [Agent<T>],
    seeds: &SeedTree,
    episodes: u64,
    steps: u64,
) -> Result<TrainingReport> {
    assert_eq!(agents.len(), env.vehicles(), "one agent per vehicle");
    let mut report = TrainingReport::default();
    for episode in 0..episodes {
        env.reset(Phase::Train, episode)?;
        let mut explore: Vec<SimRng> =
            (0..agents.len()).map(|v| seeds.stream(Purpose::Exploration, Phase::Train, v, episode)).collect();
        let mut replay: Vec<SimRng> =
            (0..agents.len()).map(|v| seeds.stream(Purpose::Replay, Phase::Train, v, episode)).collect();
        let (mut reward_sum, mut reward_n) = (0.0, 0usize);
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        for _ in 0..steps {
            let transitions = {
                let agents = &*agents;
                let mut decide =
                    |ctx: &DecisionContext<'_, T>| agents[ctx.vehicle].act(&ctx.state, &mut explore[ctx.vehicle]);
                env.step(&mut decide)?
            };
            for t in transitions {
                reward_sum += t.experience.reward.as_f64();
                reward_n += 1;
                let outcome = agents[t.vehicle].observe(t.experience, &mut replay[t.vehicle])?;
                if let Some(loss) = outcome.loss {
                    loss_sum += loss;
                    loss_n += 1;
                }
            }
        }
        report.updates += loss_n as u64;
        let mean = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
        let row = CurveRow { episode, mean_reward: mean(reward_sum, reward_n), mean_loss: mean(loss_sum, loss_n) };
        log::debug!("train episode {episode}: reward {:.6e} loss {:.6e}", row.mean_reward, row.mean_loss);
        report.curve.push(row);
    }
    Ok(report)
}

/// Greedy play with trained networks. One uniform is still drawn per
/// decision so that the exploration streams advance as in training.
#[derive(Debug)]
pub struct GreedyAgents<'a, T: Scalar> {
    agents: &'a [Agent<T>],
    seeds: SeedTree,
    rngs: Vec<SimRng>,
}

impl<'a, T: Scalar> GreedyAgents<'a, T> {
    pub fn new(agents: &'a [Agent<T>], seeds: SeedTree) -> Self {
        Self { agents, seeds, rngs: vec![] }
    }
}

impl<T: Scalar> Controller<T> for GreedyAgents<'_, T> {
    fn begin_episode(&mut self, phase: Phase, episode: u64) {
        self.rngs =
            (0..self.agents.len()).map(|v| self.seeds.stream(Purpose::Exploration, phase, v, episode)).collect();
    }

    fn decide(&mut self, ctx: &DecisionContext<'_, T>) -> usize {
        let agent = &self.agents[ctx.vehicle];
        let action = act_epsilon_greedy(&agent.net, &agent.input(&ctx.state), 0.0, &mut self.rngs[ctx.vehicle]);
        debug_assert_eq!(action, argmax(&agent.net.forward(&agent.input(&ctx.state))));
        action
    }
}

/// Per-episode outcome of the testing stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TestEpisode {
    pub episode: u64,
    /// `(vehicle, Σ_t γ^(t−1) r_t)` over the vehicle's own acting steps, for
    /// every vehicle that acted at least once.
    pub returns: Vec<(usize, f64)>,
    pub mean_reward: f64,
}

impl TestEpisode {
    pub fn mean_return(&self) -> f64 {
        if self.returns.is_empty() {
            return f64::NAN;
        }
        self.returns.iter().map(|&(_, g)| g).sum::<f64>() / self.returns.len() as f64
    }
}

/// Discounted return `Σ_t γ^(t−1) r_t` of a reward sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut g = 0.0;
    let mut w = 1.0;
    for &r in rewards {
        g += w * r;
        w *= gamma;
    }
    g
}

/// Testing stage: no exploration, no learning.
pub fn run_testing<T: Scalar, E: Environment<T> + ?Sized, C: Controller<T> + ?Sized>(
    env: &mut E,
    controller: &mut C,
    episodes: u64,
    steps: u64,
    gamma: f64,
) -> Result<Vec<TestEpisode>> {
    let mut out = Vec::with_capacity(episodes as usize);
    for episode in 0..episodes {
        env.reset(Phase::Test, episode)?;
        controller.begin_episode(Phase::Test, episode);
        let mut rewards: Vec<Vec<f64>> = vec![vec![]; env.vehicles()];
        for _ in 0..steps {
            let mut decide = |ctx: &DecisionContext<'_, T>| controller.decide(ctx);
            for t in env.step(&mut decide)? {
                rewards[t.vehicle].push(t.experience.reward.as_f64());
            }
        }
        let all: Vec<f64> = rewards.iter().flatten().copied().collect();
        let mean_reward = if all.is_empty() { f64::NAN } else { all.iter().sum::<f64>() / all.len() as f64 };
        let returns = rewards
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(v, r)| (v, discounted_return(r, gamma)))
            .collect();
        out.push(TestEpisode { episode, returns, mean_reward });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddqn::agent::{AgentConfig, EpsilonSchedule};
    use crate::ddqn::state::{ActionSpace, StateNormalizer};
    use rand::Rng;

    /// Two-vehicle bandit: reward `−|level − 7|`, vehicle 1 acts only on even steps.
    struct Bandit {
        actions: ActionSpace,
        t: u64,
        rng: SimRng,
    }

    impl Environment<f64> for Bandit {
        fn vehicles(&self) -> usize {
            2
        }

        fn reset(&mut self, phase: Phase, episode: u64) -> Result<()> {
            self.t = 0;
            self.rng = SeedTree::new(5).stream(Purpose::Channel, phase, 0, episode);
            Ok(())
        }

        fn step(&mut self, decide: &mut dyn FnMut(&DecisionContext<'_, f64>) -> usize) -> Result<Vec<Transition<f64>>> {
            let mut out = vec![];
            for v in 0..2 {
                if v == 1 && self.t % 2 == 1 {
                    continue;
                }
                let state = AgentState { gamma_prev: self.rng.random_range(1.0..100.0), d_now: 100.0, q_now: 5 };
                let a = decide(&DecisionContext { vehicle: v, state, loss_history: &[] });
                let r = -((self.actions.level(a) as f64) - 7.0).abs();
                out.push(Transition {
                    vehicle: v,
                    experience: Experience { state, action: a, reward: r, next_state: state },
                });
            }
            self.t += 1;
            Ok(out)
        }
    }

    fn bandit() -> Bandit {
        Bandit {
            actions: ActionSpace::default(),
            t: 0,
            rng: SeedTree::new(5).stream(Purpose::Channel, Phase::Setup, 0, 0),
        }
    }

    fn agents(batch: usize, eps: f64) -> Vec<Agent<f64>> {
        let cfg = AgentConfig {
            gamma: 0.0,
            lr: 0.05,
            batch_size: batch,
            sync_every: 10,
            buffer_capacity: 1000,
            epsilon: EpsilonSchedule::constant(eps),
            hidden: vec![16],
            reward_scale: 1.0,
        };
        let norm = StateNormalizer::new(7.0, 500.0, 10.0, &ActionSpace::default());
        (0..2)
            .map(|v| {
                let mut r = SeedTree::new(1).stream(Purpose::Network, Phase::Setup, v, 0);
                Agent::new(cfg.clone(), ActionSpace::default(), norm, &mut r)
            })
            .collect()
    }

    #[test]
    fn gate_never_opens_with_short_episode() {
        let mut env = bandit();
        let mut a = agents(64, 0.5);
        let rep = run_training(&mut env, &mut a, &SeedTree::new(0), 1, 20).unwrap();
        assert_eq!(rep.updates, 0);
        assert_eq!(rep.curve.len(), 1);
        assert!(rep.curve[0].mean_loss.is_nan());
        assert!(rep.curve[0].mean_reward.is_finite());
        assert!(rep.curve[0].mean_reward >= -5.0);
    }

    #[test]
    fn bandit_is_learned() {
        let mut env = bandit();
        let mut a = agents(16, 1.0);
        let rep = run_training(&mut env, &mut a, &SeedTree::new(0), 30, 50).unwrap();
        assert!(rep.updates > 0);
        let mut greedy = GreedyAgents::new(&a, SeedTree::new(0));
        let test = run_testing(&mut env, &mut greedy, 2, 10, 0.9).unwrap();
        for ep in &test {
            assert_eq!(ep.mean_reward, 0.0, "greedy policy should pick level 7");
        }
    }

    #[test]
    fn testing_is_reproducible_and_counts_own_steps() {
        let a = agents(16, 0.5);
        let run = || {
            let mut env = bandit();
            let mut greedy = GreedyAgents::new(&a, SeedTree::new(3));
            run_testing(&mut env, &mut greedy, 2, 6, 0.0).unwrap()
        };
        let (x, y) = (run(), run());
        assert_eq!(x, y);
        // γ = 0 keeps only each vehicle's first reward.
        let mut env = bandit();
        let mut greedy = GreedyAgents::new(&a, SeedTree::new(3));
        let one = run_testing(&mut env, &mut greedy, 1, 1, 0.0).unwrap();
        assert_eq!(x[0].returns, one[0].returns);
    }

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[-2.0, -4.0, -8.0], 0.0), -2.0);
        assert_eq!(discounted_return(&[-2.0, -4.0, -8.0], 0.5), -2.0 - 2.0 - 2.0);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }
}
