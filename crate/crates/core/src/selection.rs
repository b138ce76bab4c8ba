//! Mobility- and model-aware vehicle selection at the start of a round.
//!
//! A vehicle's utility is `φ = α + β`: `α` is the normalized distance between
//! its local model and the global model, `β` compares its remaining residence
//! time with the average round duration. Vehicles with `φ ≥ φ*` participate.

use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionDecision<T: Scalar> {
    pub vehicle: usize,
    pub alpha: T,
    pub beta: T,
    pub phi: T,
    pub selected: bool,
}

impl<T: Scalar> SelectionDecision<T> {
    pub fn new(vehicle: usize, alpha: T, beta: T) -> Self {
        Self { vehicle, alpha, beta, phi: utility(alpha, beta), selected: false }
    }
}

/// `‖w_n − w_g‖ / max(‖w_n‖, ‖w_g‖)`, clamped to `[0, 1]`; zero when both models are zero.
pub fn model_similarity<T: Scalar>(local: &[T], global: &[T]) -> T {
    debug_assert_eq!(local.len(), global.len());
    let denom = scalar::norm(local).max(scalar::norm(global));
    if denom == T::zero() {
        return T::zero();
    }
    let diff: T = local.iter().zip(global).map(|(&a, &b)| (a - b) * (a - b)).sum();
    (diff.sqrt() / denom).min(T::one())
}

/// `(T_res − T_g) / max(T_res, T_g)`, in `[−1, 1)`; zero when both times are zero.
pub fn time_margin<T: Scalar>(residence: T, avg_round: T) -> T {
    let denom = residence.max(avg_round);
    if denom <= T::zero() {
        return T::zero();
    }
    (residence - avg_round) / denom
}

pub fn utility<T: Scalar>(alpha: T, beta: T) -> T {
    alpha + beta
}

/// Marks every candidate with `φ ≥ φ*`. If none qualifies, the single
/// highest-utility vehicle is selected (earliest on ties), so `1 ≤ K ≤ N`.
/// Returns the selected vehicle ids in candidate order.
pub fn select<T: Scalar>(candidates: &mut [SelectionDecision<T>], phi_star: T) -> Vec<usize> {
    assert!(!candidates.is_empty(), "selection needs at least one candidate");
    for c in candidates.iter_mut() {
        c.selected = c.phi >= phi_star;
    }
    if !candidates.iter().any(|c| c.selected) {
        if let Some(i) = best_index(candidates) {
            candidates[i].selected = true;
        }
    }
    candidates.iter().filter(|c| c.selected).map(|c| c.vehicle).collect()
}

/// Selects exactly `k` vehicles with the highest utility, ignoring the
/// threshold. Ties go to the lower candidate index.
pub fn select_top<T: Scalar>(candidates: &mut [SelectionDecision<T>], k: usize) -> Vec<usize> {
    assert!(!candidates.is_empty(), "selection needs at least one candidate");
    let k = k.clamp(1, candidates.len());
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b].phi.partial_cmp(&candidates[a].phi).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for c in candidates.iter_mut() {
        c.selected = false;
    }
    for &i in &order[..k] {
        candidates[i].selected = true;
    }
    candidates.iter().filter(|c| c.selected).map(|c| c.vehicle).collect()
}

fn best_index<T: Scalar>(candidates: &[SelectionDecision<T>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        match best {
            Some(b) if candidates[b].phi >= c.phi => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Mean of the completed round durations, or `bootstrap` before the first round.
pub fn update_round_time_avg<T: Scalar>(history: &[T], bootstrap: T) -> T {
    if history.is_empty() {
        return bootstrap;
    }
    history.iter().copied().sum::<T>() / T::from_usize_lossy(history.len())
}
