//! Quantized federated learning: local loss and gradient, aggregation of
//! quantized gradients, best-model tracking and the convergence test.

pub mod convergence;
pub mod task;

use crate::error::{Error, Result};
use crate::quantizer::{self, GradientVector, QuantizedGradient};
use crate::scalar::Scalar;

pub use convergence::{fed_round_time, min_convergence_rounds, total_time_estimate, ConvergenceModel};
pub use task::{Dataset, LearningTask, LogisticRegression, TwoLayerNet};

/// Global or local model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector<T: Scalar>(Vec<T>);

impl<T: Scalar> ModelVector<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(weights))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn distance_sq(&self, other: &Self) -> T {
        self.0.iter().zip(&other.0).map(|(&a, &b)| (a - b) * (a - b)).sum()
    }
}

/// Mean regularized loss of `w` over the whole local dataset.
pub fn local_loss<T: Scalar>(task: &dyn LearningTask<T>, w: &ModelVector<T>, data: &Dataset<T>) -> Result<T> {
    if data.is_empty() {
        return Err(Error::Validation("local dataset is empty".into()));
    }
    let all: Vec<usize> = (0..data.len()).collect();
    Ok(task::subset_loss(task, w.as_slice(), data, &all))
}

/// Gradient of the mean mini-batch loss at `w`.
pub fn local_gradient<T: Scalar>(
    task: &dyn LearningTask<T>,
    w: &ModelVector<T>,
    data: &Dataset<T>,
    minibatch: &[usize],
) -> Result<GradientVector<T>> {
    if minibatch.is_empty() {
        return Err(Error::Validation("mini-batch is empty".into()));
    }
    GradientVector::new(task::subset_gradient(task, w.as_slice(), data, minibatch))
}

/// `w_g − (η/K) Σ_k dequantize(Q_k)`.
pub fn aggregate<T: Scalar>(
    global: &ModelVector<T>,
    quantized: &[QuantizedGradient<T>],
    eta: T,
) -> Result<ModelVector<T>> {
    if quantized.is_empty() {
        return Err(Error::Validation("aggregation needs at least one gradient".into()));
    }
    let mut sum = vec![T::zero(); global.dim()];
    for q in quantized {
        if q.dim() != global.dim() {
            return Err(Error::DimensionMismatch { expected: global.dim(), found: q.dim() });
        }
        let g = quantizer::dequantize(q)?;
        for (s, &v) in sum.iter_mut().zip(g.values()) {
            *s += v;
        }
    }
    let step = eta / T::from_usize_lossy(quantized.len());
    ModelVector::new(global.as_slice().iter().zip(sum).map(|(&w, s)| w - step * s).collect())
}

/// Mean of the selected vehicles' local losses.
pub fn global_loss<T: Scalar>(local_losses: &[T]) -> Result<T> {
    if local_losses.is_empty() {
        return Err(Error::Validation("global loss needs at least one local loss".into()));
    }
    Ok(local_losses.iter().copied().sum::<T>() / T::from_usize_lossy(local_losses.len()))
}

/// Running argmin of the global loss; the earliest round wins ties.
#[derive(Debug, Clone, PartialEq)]
pub struct BestModel<T: Scalar> {
    pub round: usize,
    pub model: ModelVector<T>,
    pub loss: T,
}

#[derive(Debug, Clone, Default)]
pub struct BestTracker<T: Scalar> {
    best: Option<BestModel<T>>,
}

impl<T: Scalar> BestTracker<T> {
    pub fn new() -> Self {
        Self { best: None }
    }

    pub fn observe(&mut self, round: usize, model: &ModelVector<T>, loss: T) -> &BestModel<T> {
        let replace = match &self.best {
            None => true,
            Some(b) => loss < b.loss,
        };
        if replace {
            self.best = Some(BestModel { round, model: model.clone(), loss });
        }
        self.best.as_ref().expect("set above")
    }

    pub fn best(&self) -> Option<&BestModel<T>> {
        self.best.as_ref()
    }
}

/// Best model over a completed history of `(model, loss)` pairs.
pub fn track_best<T: Scalar>(history: &[(ModelVector<T>, T)]) -> Option<BestModel<T>> {
    let mut tracker = BestTracker::new();
    for (r, (m, l)) in history.iter().enumerate() {
        tracker.observe(r, m, *l);
    }
    tracker.best
}

/// λ-optimal difference: `F_cur − F_best ≤ λ`.
pub fn check_convergence<T: Scalar>(current: T, best: T, lambda: T) -> bool {
    current - best <= lambda
}

/// One per-vehicle row of round metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u64,
    pub vehicle: usize,
    pub k: usize,
    pub q: u32,
    pub t_comp: f64,
    pub t_upload: f64,
    pub t_fed: f64,
    pub r_lambda: u64,
    pub t_total: f64,
    pub qe: f64,
    pub f_global: f64,
    pub f_best: f64,
    pub converged: bool,
}

impl RoundMetrics {
    /// Checks the row's arithmetic identities exactly as computed.
    pub fn identities_hold(&self, lambda: f64) -> bool {
        self.k >= 1
            && self.t_fed == fed_round_time(self.t_comp, self.t_upload)
            && self.t_total == total_time_estimate(self.r_lambda, self.t_fed)
            && self.converged == check_convergence(self.f_global, self.f_best, lambda)
    }
}
