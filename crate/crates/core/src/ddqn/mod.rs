//! Distributed double-DQN for quantization-level control. Every vehicle owns
//! its own prediction network, target network and replay buffer.

pub mod agent;
pub mod network;
pub mod replay;
pub mod state;
pub mod training;

pub use agent::{
    act_epsilon_greedy, double_q_target, reward, sync_target, target_value, train_step, Agent, AgentConfig,
    EpsilonSchedule, LearnOutcome,
};
pub use network::{argmax, QNetwork, QSample};
pub use replay::{Experience, ReplayBuffer};
pub use state::{ActionSpace, AgentState, StateNormalizer, Q_MAX, Q_MIN};
pub use training::{
    discounted_return, run_testing, run_training, Controller, CurveRow, DecisionContext, Environment, GreedyAgents,
    TestEpisode, TrainingReport, Transition,
};
