//! Desk-scale learning tasks: L2-regularized binary logistic regression
//! (convex, the default) and a one-hidden-layer tanh network (non-convex).
//!
//! Labels are stored as ±1. Every loss is the mean sample loss plus
//! `reg/2 · ‖w‖²`.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Row-major sample matrix with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    features: Vec<T>,
    labels: Vec<T>,
    dim: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<T>, labels: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch { expected: labels.len() * dim, found: features.len() });
        }
        Ok(Self { features, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> T {
        self.labels[i]
    }

    /// Dataset with every sample repeated `times` times.
    pub fn repeated(&self, times: usize) -> Self {
        let mut features = Vec::with_capacity(self.features.len() * times);
        let mut labels = Vec::with_capacity(self.labels.len() * times);
        for i in 0..self.len() {
            for _ in 0..times {
                features.extend_from_slice(self.x(i));
                labels.push(self.y(i));
            }
        }
        Self { features, labels, dim: self.dim }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset<T>>) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for p in parts {
            match dim {
                None => dim = Some(p.dim),
                Some(d) if d != p.dim => return Err(Error::DimensionMismatch { expected: d, found: p.dim }),
                _ => {}
            }
            features.extend_from_slice(&p.features);
            labels.extend_from_slice(&p.labels);
        }
        let dim = dim.ok_or_else(|| Error::Validation("no datasets to concatenate".into()))?;
        Self::new(features, labels, dim)
    }

    /// Largest eigenvalue of `XᵀX / n` by power iteration from the all-ones vector.
    pub fn gram_spectral_norm(&self, iters: usize) -> T {
        let n = T::from_usize_lossy(self.len().max(1));
        let mut v = vec![T::one() / T::from_usize_lossy(self.dim).sqrt(); self.dim];
        let mut eig = T::zero();
        for _ in 0..iters {
            let mut next = vec![T::zero(); self.dim];
            for i in 0..self.len() {
                let x = self.x(i);
                let proj = scalar::dot(x, &v);
                for (nj, &xj) in next.iter_mut().zip(x) {
                    *nj += proj * xj;
                }
            }
            next.iter_mut().for_each(|e| *e /= n);
            let nrm = scalar::norm(&next);
            if nrm == T::zero() {
                return T::zero();
            }
            eig = nrm;
            v = next.into_iter().map(|e| e / nrm).collect();
        }
        eig
    }
}

/// Per-sample loss and gradient of a parametric binary classifier.
pub trait LearningTask<T: Scalar>: Send + Sync {
    fn param_dim(&self) -> usize;

    fn regularization(&self) -> T;

    /// Raw classifier score; its sign is the predicted label.
    fn score(&self, w: &[T], x: &[T]) -> T;

    /// Gradient of the unregularized sample loss, added into `grad`.
    fn accumulate_sample_gradient(&self, w: &[T], x: &[T], y: T, grad: &mut [T]);

    /// Upper estimate of the smoothness constant of the mean loss on `data`.
    fn smoothness_estimate(&self, data: &Dataset<T>) -> T;

    /// Whether the regularized loss is strongly convex, so the convergence-round bound applies.
    fn is_convex(&self) -> bool;

    fn sample_loss(&self, w: &[T], x: &[T], y: T) -> T {
        softplus(-y * self.score(w, x))
    }

    fn reg_term(&self, w: &[T]) -> T {
        self.regularization() * T::lit(0.5) * scalar::norm_sq(w)
    }
}

/// `ln(1 + eᶻ)` without overflow.
pub fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticRegression<T: Scalar> {
    pub dim: usize,
    pub reg: T,
}

impl<T: Scalar> LearningTask<T> for LogisticRegression<T> {
    fn param_dim(&self) -> usize {
        self.dim
    }

    fn regularization(&self) -> T {
        self.reg
    }

    fn score(&self, w: &[T], x: &[T]) -> T {
        scalar::dot(w, x)
    }

    fn accumulate_sample_gradient(&self, w: &[T], x: &[T], y: T, grad: &mut [T]) {
        // d/dw ln(1 + exp(-y w·x)) = -y σ(-y w·x) x
        let coef = -y * sigmoid(-y * scalar::dot(w, x));
        for (g, &xj) in grad.iter_mut().zip(x) {
            *g += coef * xj;
        }
    }

    fn smoothness_estimate(&self, data: &Dataset<T>) -> T {
        data.gram_spectral_norm(100) * T::lit(0.25) + self.reg
    }

    fn is_convex(&self) -> bool {
        self.reg > T::zero()
    }
}

/// `s(x) = vᵀ tanh(W x + b) + c`. Parameters are laid out as `W` (row-major,
/// hidden × inputs), then `b`, then `v`, then `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLayerNet<T: Scalar> {
    pub inputs: usize,
    pub hidden: usize,
    pub reg: T,
}

impl<T: Scalar> TwoLayerNet<T> {
    fn offsets(&self) -> (usize, usize, usize) {
        let w = self.hidden * self.inputs;
        (w, w + self.hidden, w + 2 * self.hidden)
    }

    fn hidden_activations(&self, w: &[T], x: &[T]) -> Vec<T> {
        let (ob, _, _) = self.offsets();
        (0..self.hidden)
            .map(|h| {
                let row = &w[h * self.inputs..(h + 1) * self.inputs];
                (scalar::dot(row, x) + w[ob + h]).tanh()
            })
            .collect()
    }
}

impl<T: Scalar> LearningTask<T> for TwoLayerNet<T> {
    fn param_dim(&self) -> usize {
        self.hidden * (self.inputs + 2) + 1
    }

    fn regularization(&self) -> T {
        self.reg
    }

    fn score(&self, w: &[T], x: &[T]) -> T {
        let (_, ov, oc) = self.offsets();
        let a = self.hidden_activations(w, x);
        scalar::dot(&w[ov..ov + self.hidden], &a) + w[oc]
    }

    fn accumulate_sample_gradient(&self, w: &[T], x: &[T], y: T, grad: &mut [T]) {
        let (ob, ov, oc) = self.offsets();
        let a = self.hidden_activations(w, x);
        let s = scalar::dot(&w[ov..ov + self.hidden], &a) + w[oc];
        let ds = -y * sigmoid(-y * s);
        grad[oc] += ds;
        for h in 0..self.hidden {
            grad[ov + h] += ds * a[h];
            let dz = ds * w[ov + h] * (T::one() - a[h] * a[h]);
            grad[ob + h] += dz;
            let row = &mut grad[h * self.inputs..(h + 1) * self.inputs];
            for (g, &xj) in row.iter_mut().zip(x) {
                *g += dz * xj;
            }
        }
    }

    fn smoothness_estimate(&self, data: &Dataset<T>) -> T {
        // Heuristic: the linear-model constant scaled by the hidden width.
        data.gram_spectral_norm(100) * T::lit(0.25) * T::from_usize_lossy(self.hidden.max(1)) + self.reg
    }

    fn is_convex(&self) -> bool {
        false
    }
}

/// Mean regularized loss over `indices` of `data`.
pub fn subset_loss<T: Scalar>(task: &dyn LearningTask<T>, w: &[T], data: &Dataset<T>, indices: &[usize]) -> T {
    let n = T::from_usize_lossy(indices.len());
    let total: T = indices.iter().map(|&i| task.sample_loss(w, data.x(i), data.y(i))).sum();
    total / n + task.reg_term(w)
}

/// Gradient of [`subset_loss`].
pub fn subset_gradient<T: Scalar>(task: &dyn LearningTask<T>, w: &[T], data: &Dataset<T>, indices: &[usize]) -> Vec<T> {
    let mut grad = vec![T::zero(); task.param_dim()];
    for &i in indices {
        task.accumulate_sample_gradient(w, data.x(i), data.y(i), &mut grad);
    }
    let n = T::from_usize_lossy(indices.len());
    let reg = task.regularization();
    for (g, &wj) in grad.iter_mut().zip(w) {
        *g = *g / n + reg * wj;
    }
    grad
}

pub fn accuracy<T: Scalar>(task: &dyn LearningTask<T>, w: &[T], data: &Dataset<T>) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = (0..data.len())
        .filter(|&i| {
            let s = task.score(w, data.x(i));
            (s >= T::zero()) == (data.y(i) > T::zero())
        })
        .count();
    hits as f64 / data.len() as f64
}

/// Draws a mini-batch of `size` distinct indices (all of them if `size ≥ len`).
pub fn sample_minibatch<R: Rng + ?Sized>(len: usize, size: usize, rng: &mut R) -> Vec<usize> {
    if size >= len {
        return (0..len).collect();
    }
    let mut idx = index::sample(rng, len, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Linear teacher with gaussian features; the label is the sign of the
/// teacher score plus gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTeacher {
    pub weights: Vec<f64>,
    pub noise_std: f64,
}

impl SyntheticTeacher {
    pub fn draw<R: Rng + ?Sized>(dim: usize, noise_std: f64, rng: &mut R) -> Self {
        let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = scalar::norm(&raw).max(f64::MIN_POSITIVE);
        Self { weights: raw.into_iter().map(|w| w / n).collect(), noise_std }
    }

    pub fn dataset<T: Scalar, R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Dataset<T> {
        let dim = self.weights.len();
        let mut features = Vec::with_capacity(samples * dim);
        let mut labels = Vec::with_capacity(samples);
        for _ in 0..samples {
            let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let noise: f64 = StandardNormal.sample(rng);
            let s = scalar::dot(&x, &self.weights) + self.noise_std * noise;
            labels.push(if s >= 0.0 { T::one() } else { -T::one() });
            features.extend(x.into_iter().map(T::lit));
        }
        Dataset { features, labels, dim }
    }
}

/// Full-batch gradient descent with step `1/L` on `data`. Returns the final
/// model and its loss. Used as the reference optimum of the convex task.
pub fn reference_optimum<T: Scalar>(
    task: &dyn LearningTask<T>,
    data: &Dataset<T>,
    start: &[T],
    smoothness: T,
    iters: usize,
) -> (Vec<T>, T) {
    let all: Vec<usize> = (0..data.len()).collect();
    let step = T::one() / smoothness;
    let mut w = start.to_vec();
    for _ in 0..iters {
        let g = subset_gradient(task, &w, data, &all);
        for (wj, gj) in w.iter_mut().zip(g) {
            *wj -= step * gj;
        }
    }
    let loss = subset_loss(task, &w, data, &all);
    (w, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Phase, Purpose, SeedTree};
    use approx::assert_relative_eq;

    fn rng(v: usize) -> crate::rng::SimRng {
        SeedTree::new(9).stream(Purpose::Data, Phase::Setup, v, 0)
    }

    fn data(n: usize, dim: usize) -> Dataset<f64> {
        let teacher = SyntheticTeacher::draw(dim, 0.3, &mut rng(0));
        teacher.dataset(n, &mut rng(1))
    }

    /// Central differences of `subset_loss`, coordinate by coordinate.
    fn fd_gradient(task: &dyn LearningTask<f64>, w: &[f64], d: &Dataset<f64>, idx: &[usize], eps: f64) -> Vec<f64> {
        (0..w.len())
            .map(|j| {
                let mut p = w.to_vec();
                let mut m = w.to_vec();
                p[j] += eps;
                m[j] -= eps;
                (subset_loss(task, &p, d, idx) - subset_loss(task, &m, d, idx)) / (2.0 * eps)
            })
            .collect()
    }

    fn assert_close_rel(a: &[f64], b: &[f64], rel: f64) {
        for (j, (x, y)) in a.iter().zip(b).enumerate() {
            let scale = x.abs().max(y.abs()).max(1e-3);
            assert!((x - y).abs() <= rel * scale, "coord {j}: analytic {x} vs fd {y}");
        }
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let d = data(40, 5);
        let task = LogisticRegression { dim: 5, reg: 0.1 };
        let all: Vec<usize> = (0..d.len()).collect();
        assert_relative_eq!(subset_loss(&task, &[0.0; 5], &d, &all), std::f64::consts::LN_2, max_relative = 1e-12);
    }

    #[test]
    fn margin_lowers_loss() {
        let d = Dataset::new(vec![1.0, 2.0], vec![1.0], 2).unwrap();
        let task = LogisticRegression { dim: 2, reg: 0.0 };
        assert!(subset_loss(&task, &[1.0, 1.0], &d, &[0]) < std::f64::consts::LN_2);
    }

    #[test]
    fn duplicated_dataset_same_loss() {
        let d = data(30, 4);
        let dd = d.repeated(2);
        let task = LogisticRegression { dim: 4, reg: 0.05 };
        let w = [0.3, -0.2, 0.1, 0.7];
        let a = subset_loss(&task, &w, &d, &(0..d.len()).collect::<Vec<_>>());
        let b = subset_loss(&task, &w, &dd, &(0..dd.len()).collect::<Vec<_>>());
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn logistic_gradient_matches_central_differences() {
        let d = data(50, 6);
        let task = LogisticRegression { dim: 6, reg: 0.1 };
        let w = [0.4, -0.3, 0.2, 0.0, 1.1, -0.7];
        let idx: Vec<usize> = (0..20).collect();
        let g = subset_gradient(&task, &w, &d, &idx);
        assert_close_rel(&g, &fd_gradient(&task, &w, &d, &idx, 1e-5), 1e-4);
    }

    #[test]
    fn mlp_gradient_matches_central_differences() {
        let d = data(30, 4);
        let task = TwoLayerNet { inputs: 4, hidden: 3, reg: 0.01 };
        let mut r = rng(5);
        let w: Vec<f64> = (0..task.param_dim()).map(|_| StandardNormal.sample(&mut r)).collect();
        let idx: Vec<usize> = (0..d.len()).collect();
        let g = subset_gradient(&task, &w, &d, &idx);
        assert_close_rel(&g, &fd_gradient(&task, &w, &d, &idx, 1e-5), 1e-4);
    }

    #[test]
    fn single_sample_batch_is_sample_gradient() {
        let d = data(10, 3);
        let task = LogisticRegression { dim: 3, reg: 0.0 };
        let w = [0.2, 0.5, -0.1];
        let mut expected = vec![0.0; 3];
        task.accumulate_sample_gradient(&w, d.x(4), d.y(4), &mut expected);
        assert_eq!(subset_gradient(&task, &w, &d, &[4]), expected);
    }

    #[test]
    fn gradient_vanishes_at_minimizer() {
        let d = data(200, 5);
        let task = LogisticRegression { dim: 5, reg: 0.1 };
        let l = task.smoothness_estimate(&d);
        let (w, _) = reference_optimum(&task, &d, &[0.0; 5], l, 3000);
        let all: Vec<usize> = (0..d.len()).collect();
        assert!(scalar::norm(&subset_gradient(&task, &w, &d, &all)) < 1e-6);
    }

    #[test]
    fn smoothness_bounds_curvature() {
        // Rayleigh quotient of XᵀX/n never exceeds the power-iteration estimate.
        let d = data(300, 8);
        let eig = d.gram_spectral_norm(200);
        let mut r = rng(7);
        for _ in 0..20 {
            let v: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut r)).collect();
            let vv = scalar::norm_sq(&v);
            let q: f64 = (0..d.len()).map(|i| scalar::dot(d.x(i), &v).powi(2)).sum::<f64>() / d.len() as f64;
            assert!(q / vv <= eig * (1.0 + 1e-9));
        }
    }

    #[test]
    fn minibatch_without_replacement() {
        let mut r = rng(3);
        let b = sample_minibatch(50, 20, &mut r);
        assert_eq!(b.len(), 20);
        let mut s = b.clone();
        s.dedup();
        assert_eq!(s.len(), 20);
        assert!(b.iter().all(|&i| i < 50));
        assert_eq!(sample_minibatch(5, 20, &mut r), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn softplus_stable() {
        assert_relative_eq!(softplus(0.0_f64), std::f64::consts::LN_2);
        assert_relative_eq!(softplus(800.0_f64), 800.0);
        assert!(softplus(-800.0_f64) >= 0.0);
    }
}
