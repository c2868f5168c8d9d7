use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::explore::epsilon_greedy;
use crate::env::{decode_state, HeadLayout, StateVector};
use crate::scenario::GridWorld;

/// Per-head action values keyed by a discrete state. Unseen states read as 0.
#[derive(Debug, Clone)]
pub struct QTable<K> {
    head_sizes: Vec<usize>,
    pub alpha: f64,
    pub gamma: f64,
    values: HashMap<K, Vec<f64>>,
}

impl<K: Eq + Hash + Clone> QTable<K> {
    pub fn new(head_sizes: Vec<usize>, alpha: f64, gamma: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        QTable {
            head_sizes,
            alpha,
            gamma,
            values: HashMap::new(),
        }
    }

    fn width(&self) -> usize {
        self.head_sizes.iter().sum()
    }

    pub fn head_sizes(&self) -> &[usize] {
        &self.head_sizes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat per-head values of a state.
    pub fn row(&self, key: &K) -> Vec<f64> {
        self.values.get(key).cloned().unwrap_or_else(|| vec![0.0; self.width()])
    }

    pub fn get(&self, key: &K, head: usize, action: usize) -> f64 {
        let off: usize = self.head_sizes[..head].iter().sum();
        self.values.get(key).map_or(0.0, |row| row[off + action])
    }

    pub fn set(&mut self, key: &K, head: usize, action: usize, value: f64) {
        let off: usize = self.head_sizes[..head].iter().sum();
        let width = self.width();
        self.values.entry(key.clone()).or_insert_with(|| vec![0.0; width])[off + action] = value;
    }

    fn head_max(&self, key: &K, head: usize) -> f64 {
        let off: usize = self.head_sizes[..head].iter().sum();
        match self.values.get(key) {
            Some(row) => row[off..off + self.head_sizes[head]].iter().copied().fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        }
    }

    /// `Q <- (1 - alpha) Q + alpha (r + gamma max Q(s'))`, once per active
    /// head. Returns the new values.
    pub fn update(&mut self, s: &K, actions: &[usize], mask: &[bool], reward: f64, s_next: &K, terminal: bool) -> Vec<f64> {
        let mut out = Vec::new();
        for (h, (&a, &active)) in actions.iter().zip(mask).enumerate() {
            if !active {
                continue;
            }
            let future = if terminal { 0.0 } else { self.head_max(s_next, h) };
            let q = self.get(s, h, a);
            let new = (1.0 - self.alpha) * q + self.alpha * (reward + self.gamma * future);
            self.set(s, h, a, new);
            out.push(new);
        }
        out
    }

    pub fn act<R: Rng + ?Sized>(&self, key: &K, mask: &[bool], eps: f64, rng: &mut R) -> Vec<usize> {
        epsilon_greedy(&self.row(key), &self.head_sizes, mask, eps, rng)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&K, &Vec<f64>)> {
        self.values.iter()
    }

    pub fn insert_row(&mut self, key: K, row: Vec<f64>) {
        self.values.insert(key, row);
    }
}

/// Discrete key of an environment state: BS and UE lattice cells (coarsened
/// by `cell_stride` lattice steps), then resolution and power indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TabularKey(pub Vec<i64>);

pub fn tabular_key(layout: &HeadLayout, grid: &GridWorld, state: &StateVector, cell_stride: i64) -> TabularKey {
    let d = decode_state(layout, grid, state);
    let mut key = Vec::new();
    let coarse = |idx: [i64; 3]| idx.map(|i| i.div_euclid(cell_stride));
    key.extend(coarse(grid.lattice_index(&d.bs)));
    for ue in d.ues.iter().flatten() {
        key.extend(coarse(grid.lattice_index(ue)));
    }
    key.extend(d.resolutions.iter().flatten().map(|&r| r as i64));
    key.extend(d.power_levels.iter().flatten().map(|&p| p as i64));
    TabularKey(key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_examples() {
        let mut t: QTable<u8> = QTable::new(vec![2], 0.1, 0.8);
        assert_eq!(t.update(&0, &[0], &[true], 1.0, &1, false), vec![0.1]);

        let mut z: QTable<u8> = QTable::new(vec![2], 0.1, 0.8);
        z.update(&0, &[1], &[true], 0.0, &0, false);
        assert_eq!(z.get(&0, 0, 1), 0.0);

        let mut full: QTable<u8> = QTable::new(vec![2], 1.0, 0.8);
        full.set(&0, 0, 0, 5.0);
        full.set(&1, 0, 1, 2.5);
        full.update(&0, &[0], &[true], 0.75, &1, false);
        assert_eq!(full.get(&0, 0, 0), 0.75 + 0.8 * 2.5);
    }

    #[test]
    fn inactive_heads_untouched() {
        let mut t: QTable<u8> = QTable::new(vec![2, 3], 0.5, 0.8);
        t.update(&0, &[1, 2], &[true, false], 1.0, &0, true);
        assert_eq!(t.get(&0, 0, 1), 0.5);
        assert_eq!(t.get(&0, 1, 2), 0.0);
    }
}
