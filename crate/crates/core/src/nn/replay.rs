use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CAPACITY: usize = 10_000;

/// One stored step: the sub-action tuple is kept as per-head indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub actions: Vec<usize>,
    /// Heads that were live in `state`; the others carry no decision.
    pub active: Vec<bool>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for genuine terminal states; time-limit ends bootstrap.
    pub terminal: bool,
}

/// FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    /// `n` distinct items drawn uniformly, or `None` (skip learning) when the
    /// buffer holds fewer than `n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&T>> {
        if n == 0 || n > self.items.len() {
            return None;
        }
        let picks = rand::seq::index::sample(rng, self.items.len(), n);
        Some(picks.into_iter().map(|i| &self.items[i]).collect())
    }
}
