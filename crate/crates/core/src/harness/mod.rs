//! Configuration, the simulated environment, experiment orchestration and
//! CSV output.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod sim;

pub use config::{dbm_to_watts, load_config, SimConfig, TaskKind};
pub use experiment::{build_agents, run_experiment, sweep_participants, sweep_w1, ExperimentResult, Summary};
pub use metrics::{comparison_csv, emit_metrics, fmt_g, write_atomic};
pub use sim::{EpisodeStats, VecEnvironment};
