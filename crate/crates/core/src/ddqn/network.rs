//! Fully connected Q-network with hand-written backpropagation.
//!
//! Hidden layers use ReLU, the output layer is linear with one unit per action.

use rand::Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
struct Dense<T: Scalar> {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| T::lit(rng.random_range(-limit..limit))).collect();
        Self { inputs, outputs, weights, bias: vec![T::zero(); outputs] }
    }

    fn forward(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (&w, &xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T: Scalar> {
    layers: Vec<Dense<T>>,
}

/// Parameter-shaped buffer for gradients, laid out like [`QNetwork::params`].
pub type Gradient<T> = Vec<T>;

/// One regression sample: network input, taken action, target value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSample<'a, T: Scalar> {
    pub input: &'a [T],
    pub action: usize,
    pub target: T,
}

impl<T: Scalar> QNetwork<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: &[usize], outputs: usize, rng: &mut R) -> Self {
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        let layers = widths.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        self.activations(input).pop().expect("output layer")
    }

    /// Post-activation values of every layer, input first.
    fn activations(&self, input: &[T]) -> Vec<Vec<T>> {
        debug_assert_eq!(input.len(), self.input_dim());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().expect("previous layer"), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error `mean (y − Q(s, a))²` over `batch` and its gradient.
    /// Only the taken action's output contributes.
    pub fn loss_and_gradient(&self, batch: &[QSample<'_, T>]) -> (T, Gradient<T>) {
        let mut grad = vec![T::zero(); self.param_count()];
        let offsets = self.offsets();
        let n = T::from_usize_lossy(batch.len().max(1));
        let mut loss = T::zero();

        for sample in batch {
            let acts = self.activations(sample.input);
            let q = acts.last().expect("output")[sample.action];
            let err = q - sample.target;
            loss += err * err;

            // dL/d(output) for this sample, only at the taken action.
            let mut delta = vec![T::zero(); self.output_dim()];
            delta[sample.action] = T::lit(2.0) * err / n;

            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (w_off, b_off) = offsets[li];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == T::zero() {
                        continue;
                    }
                    grad[b_off + o] += d;
                    let row = &mut grad[w_off + o * layer.inputs..w_off + (o + 1) * layer.inputs];
                    for (g, &x) in row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![T::zero(); layer.inputs];
                for (&d, row) in delta.iter().zip(layer.weights.chunks_exact(layer.inputs)) {
                    if d == T::zero() {
                        continue;
                    }
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // ReLU derivative on the hidden activation that fed this layer.
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= T::zero() {
                        *p = T::zero();
                    }
                }
                delta = prev;
            }
        }
        (loss / n, grad)
    }

    /// Mean squared error only.
    pub fn loss(&self, batch: &[QSample<'_, T>]) -> T {
        let n = T::from_usize_lossy(batch.len().max(1));
        batch
            .iter()
            .map(|s| {
                let e = self.forward(s.input)[s.action] - s.target;
                e * e
            })
            .sum::<T>()
            / n
    }

    pub fn apply_gradient(&mut self, grad: &[T], lr: T) {
        debug_assert_eq!(grad.len(), self.param_count());
        let mut it = grad.iter();
        for layer in &mut self.layers {
            for (w, &g) in layer.weights.iter_mut().chain(layer.bias.iter_mut()).zip(&mut it) {
                *w -= lr * g;
            }
        }
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn params(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn set_params(&mut self, params: &[T]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for layer in &mut self.layers {
            for (w, &p) in layer.weights.iter_mut().chain(layer.bias.iter_mut()).zip(&mut it) {
                *w = p;
            }
        }
    }

    pub fn copy_from(&mut self, other: &Self) {
        self.clone_from(other);
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = off;
                let b = w + l.weights.len();
                off = b + l.bias.len();
                (w, b)
            })
            .collect()
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
