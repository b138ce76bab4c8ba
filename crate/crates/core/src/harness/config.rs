//! JSON configuration. Missing keys take the defaults below; unknown keys are
//! rejected. Physical quantities are SI after loading (transmit power is
//! given in dBm and converted to W).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{AdaptiveConfig, Policy};
use crate::ddqn::{ActionSpace, EpsilonSchedule};
use crate::error::{Error, Result};
use crate::mobility_channel::FadingModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Binary logistic regression with L2 regularization (convex).
    Logistic,
    /// One tanh hidden layer (non-convex).
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Noise power, W.
    pub sigma2: f64,
    /// Transmit power, dBm.
    pub p_dbm: f64,
    /// Coverage radius, m.
    #[serde(rename = "R_B")]
    pub r_b: f64,
    /// Total uplink bandwidth, Hz.
    #[serde(rename = "B")]
    pub bandwidth: f64,
    /// Number of subcarriers.
    #[serde(rename = "W")]
    pub subcarriers: u32,
    /// Mean vehicle speed, m/s.
    pub v_mean: f64,
    /// Relative speed spread: speeds are uniform in `v_mean · [1 − s, 1 + s]`.
    pub v_spread: f64,
    /// CPU cycles per local update.
    pub c: f64,
    /// CPU frequency, Hz.
    pub f: f64,
    /// Model size used for payload, round-count and error accounting.
    pub d: usize,
    /// Lateral offset of the road from the base station, m.
    #[serde(rename = "H")]
    pub h: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,

    /// Discount factor.
    pub gamma: f64,
    /// Target-network sync period, steps.
    #[serde(rename = "C")]
    pub sync_every: u64,
    /// Training episodes.
    #[serde(rename = "T")]
    pub episodes: u64,
    /// Replay mini-batch size.
    #[serde(rename = "I")]
    pub replay_batch: usize,
    /// Testing episodes.
    #[serde(rename = "T_prime")]
    pub test_episodes: u64,
    pub buffer_capacity: usize,
    /// Steps (FL rounds) per episode.
    #[serde(rename = "T_I")]
    pub steps: u64,
    pub epsilon: f64,
    pub epsilon_min: Option<f64>,
    pub epsilon_decay_steps: Option<u64>,
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// Reward multiplier for learning; `None` normalizes by a reference reward.
    pub reward_scale: Option<f64>,
    /// Upper end of the log10 SNR range used for state normalization.
    pub snr_log10_max: Option<f64>,

    pub w1: f64,
    pub w2: Option<f64>,
    /// Enforce `w1 + w2 = 1` and infer `w2` when omitted.
    pub weights_sum_to_one: bool,

    /// FL learning rate.
    pub eta: f64,
    pub lambda: f64,
    #[serde(rename = "L")]
    pub smoothness: Option<f64>,
    pub mu: Option<f64>,
    #[serde(rename = "Gamma")]
    pub heterogeneity: f64,
    pub init_gap_sq: f64,
    /// Replace `init_gap_sq` with the measured distance to the reference optimum.
    pub track_init_gap: bool,
    pub phi_star: f64,
    /// Bootstrap for the running average round time, s.
    #[serde(rename = "T_g0")]
    pub t_g0: Option<f64>,
    /// Cap on the simulated time advanced per step, s.
    pub step_duration: f64,
    /// Pin the number of participants per round.
    pub participants: Option<usize>,

    pub fading_mean: f64,
    pub fading_std: f64,
    pub fading_floor: f64,

    pub task: TaskKind,
    /// Input dimension; equals the parameter count for the logistic task.
    pub d_model: usize,
    pub mlp_hidden: usize,
    pub l2_reg: f64,
    pub samples_per_vehicle: usize,
    pub test_samples: usize,
    pub label_noise: f64,
    /// FL mini-batch size.
    pub batch_size: usize,
    pub reference_iters: usize,

    pub ada_window: usize,
    pub ada_rho: f64,

    pub scheme: String,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sigma2: 1e-9,
            p_dbm: 23.0,
            r_b: 500.0,
            bandwidth: 1e6,
            subcarriers: 12,
            v_mean: 10.0,
            v_spread: 0.0,
            c: 2.5e10,
            f: 5e8,
            d: 269_722,
            h: 10.0,
            alpha: 2.0,
            n: 15,
            gamma: 0.99,
            sync_every: 1000,
            episodes: 2000,
            replay_batch: 64,
            test_episodes: 500,
            buffer_capacity: 250_000,
            steps: 1000,
            epsilon: 0.5,
            epsilon_min: None,
            epsilon_decay_steps: None,
            hidden: vec![64],
            lr: 1e-3,
            reward_scale: None,
            snr_log10_max: None,
            w1: 0.5,
            w2: None,
            weights_sum_to_one: true,
            eta: 0.5,
            lambda: 0.05,
            smoothness: None,
            mu: None,
            heterogeneity: 0.5,
            init_gap_sq: 1.0,
            track_init_gap: false,
            phi_star: 0.0,
            t_g0: None,
            step_duration: 1.0,
            participants: None,
            fading_mean: 1.0,
            fading_std: 0.1,
            fading_floor: 1e-6,
            task: TaskKind::Logistic,
            d_model: 64,
            mlp_hidden: 16,
            l2_reg: 0.1,
            samples_per_vehicle: 200,
            test_samples: 1000,
            label_noise: 0.3,
            batch_size: 32,
            reference_iters: 3000,
            ada_window: 5,
            ada_rho: 1e-3,
            scheme: "dqn-gradq".into(),
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be non-negative and finite, got {v}")))
    }
}

fn unit_interval(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(key, format!("must lie in [0, 1], got {v}")))
    }
}

fn at_least_one(key: &str, v: u64) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::config(key, "must be at least 1"))
    }
}

impl SimConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<inline>"))
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |source| Error::ConfigParse { path: path.to_path_buf(), source };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        if !value.is_object() {
            return Err(Error::config("<root>", "configuration must be a JSON object"));
        }
        let cfg: SimConfig = serde_json::from_value(value).map_err(parse_err)?;
        cfg.finalize()
    }

    /// Resolves inferred values and checks every invariant.
    pub fn finalize(mut self) -> Result<Self> {
        if self.weights_sum_to_one {
            let inferred = 1.0 - self.w1;
            match self.w2 {
                None => self.w2 = Some(inferred),
                Some(w2) if (w2 - inferred).abs() > 1e-12 => {
                    return Err(Error::config("w2", format!("w1 + w2 must equal 1 (w1 = {}, w2 = {w2})", self.w1)));
                }
                Some(_) => {}
            }
        } else if self.w2.is_none() {
            return Err(Error::config("w2", "required when weights_sum_to_one is false"));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma2", self.sigma2)?;
        if !self.p_dbm.is_finite() {
            return Err(Error::config("p_dbm", "must be finite"));
        }
        positive("R_B", self.r_b)?;
        positive("B", self.bandwidth)?;
        at_least_one("W", self.subcarriers.into())?;
        positive("v_mean", self.v_mean)?;
        if !(0.0..1.0).contains(&self.v_spread) {
            return Err(Error::config("v_spread", "must lie in [0, 1)"));
        }
        positive("c", self.c)?;
        positive("f", self.f)?;
        at_least_one("d", self.d as u64)?;
        positive("H", self.h)?;
        positive("alpha", self.alpha)?;
        at_least_one("N", self.n as u64)?;

        unit_interval("gamma", self.gamma)?;
        at_least_one("C", self.sync_every)?;
        at_least_one("I", self.replay_batch as u64)?;
        at_least_one("T_prime", self.test_episodes)?;
        at_least_one("buffer_capacity", self.buffer_capacity as u64)?;
        at_least_one("T_I", self.steps)?;
        unit_interval("epsilon", self.epsilon)?;
        if let Some(e) = self.epsilon_min {
            unit_interval("epsilon_min", e)?;
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("hidden", "needs at least one layer of positive width"));
        }
        positive("lr", self.lr)?;
        if let Some(s) = self.reward_scale {
            positive("reward_scale", s)?;
        }
        if let Some(s) = self.snr_log10_max {
            positive("snr_log10_max", s)?;
        }

        non_negative("w1", self.w1)?;
        non_negative("w2", self.w2.unwrap_or(0.0))?;
        positive("eta", self.eta)?;
        positive("lambda", self.lambda)?;
        if let Some(l) = self.smoothness {
            positive("L", l)?;
        }
        if let Some(m) = self.mu {
            positive("mu", m)?;
        }
        if let (Some(l), Some(m)) = (self.smoothness, self.mu) {
            if l < m {
                return Err(Error::config("L", "must be at least mu"));
            }
        }
        non_negative("Gamma", self.heterogeneity)?;
        non_negative("init_gap_sq", self.init_gap_sq)?;
        if !self.phi_star.is_finite() {
            return Err(Error::config("phi_star", "must be finite"));
        }
        if let Some(t) = self.t_g0 {
            positive("T_g0", t)?;
        }
        positive("step_duration", self.step_duration)?;
        if let Some(k) = self.participants {
            if k == 0 || k > self.n {
                return Err(Error::config("participants", format!("must lie in [1, N = {}]", self.n)));
            }
        }

        non_negative("fading_mean", self.fading_mean)?;
        non_negative("fading_std", self.fading_std)?;
        positive("fading_floor", self.fading_floor)?;
        if self.fading_mean == 0.0 && self.fading_std == 0.0 {
            return Err(Error::config("fading_std", "fading mean and std cannot both be zero"));
        }

        at_least_one("d_model", self.d_model as u64)?;
        at_least_one("mlp_hidden", self.mlp_hidden as u64)?;
        non_negative("l2_reg", self.l2_reg)?;
        if self.mu.is_none() && self.l2_reg <= 0.0 {
            return Err(Error::config("l2_reg", "must be positive when mu is estimated from the task"));
        }
        at_least_one("samples_per_vehicle", self.samples_per_vehicle as u64)?;
        at_least_one("test_samples", self.test_samples as u64)?;
        non_negative("label_noise", self.label_noise)?;
        at_least_one("batch_size", self.batch_size as u64)?;
        if self.batch_size > self.samples_per_vehicle {
            return Err(Error::config("batch_size", "cannot exceed samples_per_vehicle"));
        }
        at_least_one("ada_window", self.ada_window as u64)?;
        non_negative("ada_rho", self.ada_rho)?;
        self.policy()?;
        Ok(())
    }

    pub fn policy(&self) -> Result<Policy> {
        self.scheme.parse()
    }

    pub fn p_watts(&self) -> f64 {
        dbm_to_watts(self.p_dbm)
    }

    pub fn w2(&self) -> f64 {
        self.w2.unwrap_or(1.0 - self.w1)
    }

    pub fn actions(&self) -> ActionSpace {
        ActionSpace::default()
    }

    pub fn fading(&self) -> FadingModel {
        FadingModel { mean: self.fading_mean, std: self.fading_std, floor: self.fading_floor }
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        match (self.epsilon_min, self.epsilon_decay_steps) {
            (Some(min), Some(steps)) => EpsilonSchedule { start: self.epsilon, min, decay_steps: Some(steps) },
            _ => EpsilonSchedule::constant(self.epsilon),
        }
    }

    pub fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig { window: self.ada_window, rho: self.ada_rho }
    }

    /// Same configuration with a different first weight; `w2` follows when
    /// the weights sum to one.
    pub fn with_w1(&self, w1: f64) -> Result<Self> {
        let mut c = self.clone();
        c.w1 = w1;
        if c.weights_sum_to_one {
            c.w2 = None;
        }
        c.finalize()
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    SimConfig::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_object_gives_table_defaults() {
        let c = SimConfig::from_json_str("{}").unwrap();
        assert_eq!(c.sigma2, 1e-9);
        assert_eq!(c.r_b, 500.0);
        assert_eq!(c.bandwidth, 1e6);
        assert_eq!(c.subcarriers, 12);
        assert_eq!(c.v_mean, 10.0);
        assert_eq!(c.c, 2.5e10);
        assert_eq!(c.f, 5e8);
        assert_eq!(c.d, 269_722);
        assert_eq!(c.h, 10.0);
        assert_eq!(c.alpha, 2.0);
        assert_eq!(c.n, 15);
        assert_eq!(c.gamma, 0.99);
        assert_eq!(c.sync_every, 1000);
        assert_eq!(c.episodes, 2000);
        assert_eq!(c.replay_batch, 64);
        assert_eq!(c.test_episodes, 500);
        assert_eq!(c.buffer_capacity, 250_000);
        assert_eq!(c.steps, 1000);
        assert_eq!(c.epsilon, 0.5);
        assert_relative_eq!(c.p_watts(), 0.19953, max_relative = 1e-4);
        assert_eq!(c.w2(), 0.5);
    }

    #[test]
    fn w2_is_inferred() {
        let c = SimConfig::from_json_str(r#"{"w1": 0.3}"#).unwrap();
        assert_relative_eq!(c.w2(), 0.7);
        let c = SimConfig::from_json_str(r#"{"w1": 0.5}"#).unwrap();
        assert_eq!(c.w2, Some(0.5));
        assert!(SimConfig::from_json_str(r#"{"w1": 0.5, "w2": 0.7}"#).is_err());
        let c = SimConfig::from_json_str(r#"{"w1": 0.5, "w2": 0.7, "weights_sum_to_one": false}"#).unwrap();
        assert_eq!(c.w2(), 0.7);
    }

    fn key_of(json: &str) -> String {
        match SimConfig::from_json_str(json) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn rejections_name_the_key() {
        assert_eq!(key_of(r#"{"N": 0}"#), "N");
        assert_eq!(key_of(r#"{"R_B": -1}"#), "R_B");
        assert_eq!(key_of(r#"{"epsilon": 1.5}"#), "epsilon");
        assert_eq!(key_of(r#"{"scheme": "fix11"}"#), "scheme");
        assert_eq!(key_of(r#"{"N": 4, "participants": 5}"#), "participants");
        assert_eq!(key_of(r#"{"hidden": []}"#), "hidden");
    }

    #[test]
    fn unknown_and_malformed_rejected() {
        let err = SimConfig::from_json_str(r#"{"bogus": 1}"#).unwrap_err();
        assert!(matches!(err, Error::ConfigParse { .. }));
        assert!(err.to_string().contains("bogus"));
        assert!(SimConfig::from_json_str("[1, 2]").is_err());
        assert!(SimConfig::from_json_str(r#"{"N": "five"}"#).is_err());
    }

    #[test]
    fn dbm_conversion() {
        assert_relative_eq!(dbm_to_watts(23.0), 0.199526, max_relative = 1e-5);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0);
        assert_relative_eq!(dbm_to_watts(0.0), 1e-3);
    }

    #[test]
    fn round_trips_through_json() {
        let c = SimConfig::default().finalize().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(SimConfig::from_json_str(&text).unwrap(), c);
    }

    #[test]
    fn with_w1_moves_w2() {
        let c = SimConfig::default().finalize().unwrap().with_w1(0.9).unwrap();
        assert_relative_eq!(c.w2(), 0.1, max_relative = 1e-12);
    }
}
