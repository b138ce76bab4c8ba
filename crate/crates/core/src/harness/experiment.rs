//! Training then testing for one scheme, plus the weight and participant sweeps.

use super::config::SimConfig;
use super::sim::{EpisodeStats, VecEnvironment};
use crate::baselines::{Policy, PolicyController};
use crate::ddqn::{run_testing, run_training, Agent, AgentConfig, CurveRow, GreedyAgents, TestEpisode};
use crate::error::Result;
use crate::fl::RoundMetrics;
use crate::rng::{Phase, Purpose, SeedTree};

/// Per-run aggregates, each recomputable from the rows of the same result.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scheme: String,
    pub w1: f64,
    /// Mean participants per round.
    pub k: f64,
    pub avg_total_time: f64,
    pub avg_qe: f64,
    /// Mean discounted return per (episode, vehicle).
    pub g_pi: f64,
    pub rounds_to_converge: f64,
    pub test_acc: f64,
    /// Mean applied level.
    pub avg_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scheme: Policy,
    pub w1: f64,
    pub w2: f64,
    pub curve: Vec<CurveRow>,
    /// Testing-stage rounds, one row per participating vehicle.
    pub rounds: Vec<RoundMetrics>,
    pub episodes: Vec<EpisodeStats>,
    pub tests: Vec<TestEpisode>,
    pub summary: Summary,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl Summary {
    pub fn compute(
        scheme: &Policy,
        w1: f64,
        rounds: &[RoundMetrics],
        episodes: &[EpisodeStats],
        tests: &[TestEpisode],
    ) -> Self {
        let test_eps: Vec<&EpisodeStats> = episodes.iter().filter(|e| e.phase == Phase::Test).collect();
        Self {
            scheme: scheme.to_string(),
            w1,
            k: mean(test_eps.iter().map(|e| e.mean_k)),
            avg_total_time: mean(rounds.iter().map(|r| r.t_total)),
            avg_qe: mean(rounds.iter().map(|r| r.qe)),
            g_pi: mean(tests.iter().flat_map(|t| t.returns.iter().map(|&(_, g)| g))),
            rounds_to_converge: mean(test_eps.iter().map(|e| e.rounds_to_converge as f64)),
            test_acc: mean(test_eps.iter().map(|e| e.test_acc)),
            avg_q: mean(rounds.iter().map(|r| r.q as f64)),
        }
    }

    /// `w1 · avg T_total + w2 · avg QE`.
    pub fn weighted_objective(&self, w2: f64) -> f64 {
        self.w1 * self.avg_total_time + w2 * self.avg_qe
    }
}

/// One agent per vehicle, initialized from its own network stream.
pub fn build_agents(cfg: &SimConfig, env: &VecEnvironment) -> Vec<Agent<f64>> {
    let seeds = SeedTree::new(cfg.seed);
    let reward_scale = cfg.reward_scale.unwrap_or_else(|| {
        let r = env.reference_reward().abs();
        if r > 0.0 && r.is_finite() {
            1.0 / r
        } else {
            1.0
        }
    });
    let agent_cfg = AgentConfig {
        gamma: cfg.gamma,
        lr: cfg.lr,
        batch_size: cfg.replay_batch,
        sync_every: cfg.sync_every,
        buffer_capacity: cfg.buffer_capacity,
        epsilon: cfg.epsilon_schedule(),
        hidden: cfg.hidden.clone(),
        reward_scale,
    };
    (0..cfg.n)
        .map(|v| {
            let mut rng = seeds.stream(Purpose::Network, Phase::Setup, v, 0);
            Agent::new(agent_cfg.clone(), env.actions().clone(), env.normalizer(), &mut rng)
        })
        .collect()
}

/// Training stage (learned scheme only), then greedy testing.
pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentResult> {
    let scheme = cfg.policy()?;
    let seeds = SeedTree::new(cfg.seed);
    let mut env = VecEnvironment::new(cfg)?;
    let (curve, tests) = if scheme.is_learning() {
        let mut agents = build_agents(cfg, &env);
        let report = run_training(&mut env, &mut agents, &seeds, cfg.episodes, cfg.steps)?;
        log::info!("training done: {} episodes, {} updates", report.curve.len(), report.updates);
        let mut greedy = GreedyAgents::new(&agents, seeds);
        let tests = run_testing(&mut env, &mut greedy, cfg.test_episodes, cfg.steps, cfg.gamma)?;
        (report.curve, tests)
    } else {
        let mut controller = PolicyController::new(scheme, env.actions().clone(), cfg.adaptive(), seeds, cfg.n);
        let tests = run_testing(&mut env, &mut controller, cfg.test_episodes, cfg.steps, cfg.gamma)?;
        (vec![], tests)
    };
    let rounds = env.take_rows();
    let episodes = env.take_stats();
    let summary = Summary::compute(&scheme, cfg.w1, &rounds, &episodes, &tests);
    Ok(ExperimentResult { scheme, w1: cfg.w1, w2: cfg.w2(), curve, rounds, episodes, tests, summary })
}

/// One independent run per first weight.
pub fn sweep_w1(cfg: &SimConfig, weights: &[f64]) -> Result<Vec<ExperimentResult>> {
    weights.iter().map(|&w1| run_experiment(&cfg.with_w1(w1)?)).collect()
}

/// One independent run per pinned participant count.
pub fn sweep_participants(cfg: &SimConfig, counts: &[usize]) -> Result<Vec<ExperimentResult>> {
    counts
        .iter()
        .map(|&k| {
            let mut c = cfg.clone();
            c.participants = Some(k);
            run_experiment(&c.finalize()?)
        })
        .collect()
}
