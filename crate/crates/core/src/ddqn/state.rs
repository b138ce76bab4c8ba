//! Agent observation, action space and input normalization.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Local observation `[γ_prev, d_now, q_now]`. `gamma_prev` is the SNR the
/// base station measured one step earlier; `q_now` the level applied last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState<T: Scalar> {
    pub gamma_prev: T,
    pub d_now: T,
    pub q_now: u32,
}

/// Ordered quantization levels; action `i` applies `levels[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    levels: Vec<u32>,
}

pub const Q_MIN: u32 = 2;
pub const Q_MAX: u32 = 10;

impl Default for ActionSpace {
    fn default() -> Self {
        Self::range(Q_MIN, Q_MAX).expect("default range valid")
    }
}

impl ActionSpace {
    pub fn range(lo: u32, hi: u32) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::Validation(format!("invalid level range [{lo}, {hi}]")));
        }
        Ok(Self { levels: (lo..=hi).collect() })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, action: usize) -> u32 {
        self.levels[action]
    }

    pub fn index_of(&self, q: u32) -> Option<usize> {
        self.levels.iter().position(|&l| l == q)
    }

    pub fn min_level(&self) -> u32 {
        self.levels[0]
    }

    pub fn max_level(&self) -> u32 {
        *self.levels.last().expect("non-empty")
    }

    pub fn contains(&self, q: u32) -> bool {
        self.index_of(q).is_some()
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }
}

/// Maps a raw observation into `[0, 1]³`.
///
/// SNR is log-compressed, `log10(1 + γ) / snr_log10_max`; distance is divided
/// by `d_max = √(R_B² + H²)`; the level is min-max scaled over the action space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateNormalizer<T: Scalar> {
    pub snr_log10_max: T,
    pub d_max: T,
    pub q_min: u32,
    pub q_max: u32,
}

impl<T: Scalar> StateNormalizer<T> {
    pub fn new(snr_log10_max: T, coverage_radius: T, lateral_offset: T, actions: &ActionSpace) -> Self {
        let d_max = (coverage_radius * coverage_radius + lateral_offset * lateral_offset).sqrt();
        Self { snr_log10_max, d_max, q_min: actions.min_level(), q_max: actions.max_level() }
    }

    pub fn normalize(&self, s: &AgentState<T>) -> [T; 3] {
        let unit = |v: T| v.max(T::zero()).min(T::one());
        let snr = (T::one() + s.gamma_prev.max(T::zero())).log10() / self.snr_log10_max;
        let d = s.d_now / self.d_max;
        let span = T::from_u32(self.q_max - self.q_min).expect("span representable").max(T::one());
        let q = T::from_u32(s.q_now.saturating_sub(self.q_min)).expect("level representable") / span;
        [unit(snr), unit(d), unit(q)]
    }
}
