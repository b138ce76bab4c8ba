use std::collections::VecDeque;

use rand::Rng;

use super::state::AgentState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience<T: Scalar> {
    pub state: AgentState<T>,
    pub action: usize,
    pub reward: T,
    pub next_state: AgentState<T>,
}

/// FIFO experience store with fixed capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<T: Scalar> {
    capacity: usize,
    items: VecDeque<Experience<T>>,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn store(&mut self, e: Experience<T>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience<T>> {
        self.items.iter()
    }

    /// `size` transitions drawn uniformly with replacement.
    pub fn sample_minibatch<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<Experience<T>>> {
        if self.items.len() < size || size == 0 {
            return Err(Error::NotReady { have: self.items.len(), need: size.max(1) });
        }
        Ok((0..size).map(|_| self.items[rng.random_range(0..self.items.len())]).collect())
    }
}
