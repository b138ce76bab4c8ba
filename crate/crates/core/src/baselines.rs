//! Benchmark quantization schemes: fixed levels, a loss-driven adaptive
//! scheme and uniform random levels.
//!
//! The adaptive scheme is a reconstruction: it starts at the lowest level and
//! raises the level by one whenever the global loss stops improving.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::ddqn::{ActionSpace, Controller, DecisionContext};
use crate::error::{Error, Result};
use crate::rng::{Phase, Purpose, SeedTree, SimRng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Fixed(u32),
    Adaptive,
    DqnGradQ,
    Random,
}

impl Policy {
    pub fn is_learning(&self) -> bool {
        matches!(self, Policy::DqnGradQ)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Fixed(q) => write!(f, "fix{q}"),
            Policy::Adaptive => f.write_str("ada-gradq"),
            Policy::DqnGradQ => f.write_str("dqn-gradq"),
            Policy::Random => f.write_str("random"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn-gradq" => Ok(Policy::DqnGradQ),
            "ada-gradq" => Ok(Policy::Adaptive),
            "random" => Ok(Policy::Random),
            _ => match s.strip_prefix("fix").map(str::parse::<u32>) {
                Some(Ok(q)) => fixed_policy(q, &ActionSpace::default()),
                _ => Err(Error::config("scheme", format!("unknown scheme `{s}`"))),
            },
        }
    }
}

/// A constant level; rejected unless it is a legal action.
pub fn fixed_policy(q: u32, actions: &ActionSpace) -> Result<Policy> {
    if !actions.contains(q) {
        return Err(Error::config(
            "scheme",
            format!("fixed level {q} outside [{}, {}]", actions.min_level(), actions.max_level()),
        ));
    }
    Ok(Policy::Fixed(q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub window: usize,
    /// Relative improvement threshold `ρ`.
    pub rho: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { window: 5, rho: 1e-3 }
    }
}

/// Level chosen after observing `history`.
///
/// Replaying the history prefix by prefix: once at least `window` losses are
/// known, compare the oldest and newest of the last `window`; if the relative
/// improvement is below `ρ` and at least `window` losses arrived since the
/// last raise, the level goes up by one. The level starts at the lowest
/// action and never exceeds the highest.
pub fn adaptive_policy<T: Scalar>(history: &[T], cfg: &AdaptiveConfig, actions: &ActionSpace) -> u32 {
    let mut q = actions.min_level();
    let mut last_raise: Option<usize> = None;
    let w = cfg.window.max(1);
    for n in w..=history.len() {
        if last_raise.is_some_and(|r| n - r < w) {
            continue;
        }
        let old = history[n - w].as_f64();
        let new = history[n - 1].as_f64();
        let improvement = if old.abs() > 0.0 { (old - new) / old.abs() } else { 0.0 };
        if improvement < cfg.rho && q < actions.max_level() {
            q += 1;
            last_raise = Some(n);
        }
    }
    q
}

/// Runs one baseline for every vehicle.
#[derive(Debug, Clone)]
pub struct PolicyController {
    policy: Policy,
    actions: ActionSpace,
    adaptive: AdaptiveConfig,
    seeds: SeedTree,
    rngs: Vec<SimRng>,
    vehicles: usize,
}

impl PolicyController {
    pub fn new(
        policy: Policy,
        actions: ActionSpace,
        adaptive: AdaptiveConfig,
        seeds: SeedTree,
        vehicles: usize,
    ) -> Self {
        Self { policy, actions, adaptive, seeds, rngs: vec![], vehicles }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }
}

impl<T: Scalar> Controller<T> for PolicyController {
    fn begin_episode(&mut self, phase: Phase, episode: u64) {
        self.rngs = (0..self.vehicles).map(|v| self.seeds.stream(Purpose::Exploration, phase, v, episode)).collect();
    }

    fn decide(&mut self, ctx: &DecisionContext<'_, T>) -> usize {
        let level = match self.policy {
            Policy::Fixed(q) => q,
            Policy::Adaptive => adaptive_policy(ctx.loss_history, &self.adaptive, &self.actions),
            Policy::Random => {
                let i = self.rngs[ctx.vehicle].random_range(0..self.actions.len());
                self.actions.level(i)
            }
            Policy::DqnGradQ => panic!("the learned scheme is driven by its agents"),
        };
        self.actions.index_of(level).expect("baseline levels are legal actions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddqn::AgentState;
    use proptest::prelude::*;

    fn ctx(history: &[f64]) -> DecisionContext<'_, f64> {
        DecisionContext {
            vehicle: 0,
            state: AgentState { gamma_prev: 10.0, d_now: 50.0, q_now: 2 },
            loss_history: history,
        }
    }

    #[test]
    fn fixed_examples() {
        let a = ActionSpace::default();
        let mut c = PolicyController::new(
            fixed_policy(2, &a).unwrap(),
            a.clone(),
            AdaptiveConfig::default(),
            SeedTree::new(0),
            1,
        );
        Controller::<f64>::begin_episode(&mut c, Phase::Test, 0);
        assert_eq!(a.level(c.decide(&ctx(&[]))), 2);
        let mut c = PolicyController::new(Policy::Fixed(10), a.clone(), AdaptiveConfig::default(), SeedTree::new(0), 1);
        for ep in 0..3 {
            Controller::<f64>::begin_episode(&mut c, Phase::Test, ep);
            for _ in 0..20 {
                assert_eq!(a.level(c.decide(&ctx(&[0.5, 0.4]))), 10);
            }
        }
        assert!(fixed_policy(11, &a).is_err());
        assert!(fixed_policy(1, &a).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for name in ["dqn-gradq", "ada-gradq", "fix2", "fix6", "fix10", "random"] {
            assert_eq!(name.parse::<Policy>().unwrap().to_string(), name);
        }
        assert!("fix11".parse::<Policy>().is_err());
        assert!("greedy".parse::<Policy>().is_err());
    }

    #[test]
    fn adaptive_examples() {
        let a = ActionSpace::default();
        let cfg = AdaptiveConfig::default();
        assert_eq!(adaptive_policy::<f64>(&[], &cfg, &a), 2);
        assert_eq!(adaptive_policy(&[0.5; 4], &cfg, &a), 2);
        assert_eq!(adaptive_policy(&[0.5; 5], &cfg, &a), 3);
        // Cooldown: the next raise needs another full window.
        assert_eq!(adaptive_policy(&[0.5; 9], &cfg, &a), 3);
        assert_eq!(adaptive_policy(&[0.5; 10], &cfg, &a), 4);
        assert_eq!(adaptive_policy(&[0.5; 200], &cfg, &a), 10);
        // Steady 10 % improvements never trigger a raise.
        let improving: Vec<f64> = (0..50).map(|i| 0.9f64.powi(i)).collect();
        assert_eq!(adaptive_policy(&improving, &cfg, &a), 2);
    }

    #[test]
    fn random_policy_stays_in_range_and_is_reproducible() {
        let a = ActionSpace::default();
        let draw = || {
            let mut c =
                PolicyController::new(Policy::Random, a.clone(), AdaptiveConfig::default(), SeedTree::new(8), 2);
            Controller::<f64>::begin_episode(&mut c, Phase::Train, 4);
            (0..200).map(|_| a.level(c.decide(&ctx(&[])))).collect::<Vec<_>>()
        };
        let levels = draw();
        assert!(levels.iter().all(|q| (2..=10).contains(q)));
        assert_eq!(levels, draw());
    }

    proptest! {
        #[test]
        fn adaptive_is_monotone_and_legal(losses in prop::collection::vec(0.0f64..2.0, 0..80)) {
            let a = ActionSpace::default();
            let cfg = AdaptiveConfig::default();
            let mut prev = a.min_level();
            for n in 0..=losses.len() {
                let q = adaptive_policy(&losses[..n], &cfg, &a);
                prop_assert!(a.contains(q));
                prop_assert!(q >= prev);
                prev = q;
            }
        }
    }
}
