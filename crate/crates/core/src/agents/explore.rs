use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::argmax;

/// Linear decay from `start` to `end` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    /// Decays over `fraction` of `total_steps`.
    pub fn over(start: f64, end: f64, fraction: f64, total_steps: u64) -> Self {
        EpsilonSchedule {
            start,
            end,
            decay_steps: ((total_steps as f64) * fraction).round() as u64,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        self.start + (self.end - self.start) * step as f64 / self.decay_steps as f64
    }
}

/// Start offset of every head in a flat output vector.
pub fn head_offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &n| {
            let off = *acc;
            *acc += n;
            Some(off)
        })
        .collect()
}

/// Per-head epsilon-greedy over a flat score vector. Inactive heads get 0.
pub fn epsilon_greedy<R: Rng + ?Sized>(scores: &[f64], sizes: &[usize], mask: &[bool], eps: f64, rng: &mut R) -> Vec<usize> {
    let offsets = head_offsets(sizes);
    sizes
        .iter()
        .zip(&offsets)
        .zip(mask)
        .map(|((&n, &off), &active)| {
            if !active {
                0
            } else if eps > 0.0 && rng.random::<f64>() < eps {
                rng.random_range(0..n)
            } else {
                argmax(&scores[off..off + n])
            }
        })
        .collect()
}
