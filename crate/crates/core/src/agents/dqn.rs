use serde::{Deserialize, Serialize};

use super::explore::{epsilon_greedy, head_offsets};
use crate::error::{Result, SimError};
use crate::nn::{AdamState, Gradients, Mlp, ReplayBuffer, Transition, DEFAULT_CAPACITY, GRAD_CLIP_NORM};
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnParams {
    pub hidden: Vec<usize>,
    /// Adam step size.
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Learn steps between target-network copies.
    pub target_sync: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the training TTIs over which epsilon decays.
    pub epsilon_decay_fraction: f64,
    pub grad_clip: f64,
}

impl Default for DqnParams {
    fn default() -> Self {
        DqnParams {
            hidden: vec![256, 128, 128],
            learning_rate: 0.01,
            gamma: 0.8,
            batch_size: 32,
            replay_capacity: DEFAULT_CAPACITY,
            target_sync: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.8,
            grad_clip: GRAD_CLIP_NORM,
        }
    }
}

impl DqnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(SimError::config("agent.dqn.learning_rate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(SimError::config("agent.dqn.gamma", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(SimError::config("agent.dqn.batch_size", "must be >= 1 and fit in the replay memory"));
        }
        if self.target_sync == 0 {
            return Err(SimError::config("agent.dqn.target_sync", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(SimError::config("agent.dqn.epsilon", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Q-network with one value block per head, a frozen target copy and
/// uniform replay.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    pub params: DqnParams,
    head_sizes: Vec<usize>,
    offsets: Vec<usize>,
    online: Mlp,
    target: Mlp,
    adam: AdamState,
    replay: ReplayBuffer<Transition>,
    learn_steps: u64,
    explore_rng: SimRng,
    batch_rng: SimRng,
}

impl DqnLearner {
    pub fn new(state_len: usize, head_sizes: Vec<usize>, params: DqnParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut sizes = vec![state_len];
        sizes.extend(&params.hidden);
        sizes.push(head_sizes.iter().sum());
        let online = Mlp::new(&sizes, &mut stream(seed, Stream::Init))?;
        Ok(DqnLearner {
            adam: AdamState::new(&online, params.learning_rate),
            target: online.clone(),
            online,
            offsets: head_offsets(&head_sizes),
            head_sizes,
            replay: ReplayBuffer::new(params.replay_capacity),
            learn_steps: 0,
            explore_rng: stream(seed, Stream::Exploration),
            batch_rng: stream(seed, Stream::Minibatch),
            params,
        })
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn set_networks(&mut self, online: Mlp, target: Mlp) -> Result<()> {
        if online.sizes() != self.online.sizes() || target.sizes() != self.online.sizes() {
            return Err(SimError::config("checkpoint", "network shape does not match the configuration"));
        }
        self.adam = AdamState::new(&online, self.params.learning_rate);
        self.online = online;
        self.target = target;
        Ok(())
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.online.predict(state)
    }

    pub fn select(&mut self, state: &[f64], mask: &[bool], eps: f64) -> Result<Vec<usize>> {
        let q = self.q_values(state)?;
        Ok(epsilon_greedy(&q, &self.head_sizes, mask, eps, &mut self.explore_rng))
    }

    /// Stores the transition and, once the memory holds a minibatch, takes
    /// one gradient step. Returns the minibatch loss when a step was taken.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>> {
        self.replay.push(t);
        let batch: Vec<Transition> = match self.replay.sample(self.params.batch_size, &mut self.batch_rng) {
            Some(b) => b.into_iter().cloned().collect(),
            None => return Ok(None),
        };
        self.learn_batch(&batch).map(Some)
    }

    /// Minibatch loss `1/2 (Q - Q_tar)^2`, averaged over samples and their
    /// active heads, without updating anything.
    pub fn batch_loss(&self, batch: &[Transition]) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for t in batch {
            let q = self.online.predict(&t.state)?;
            let targets = self.targets(t)?;
            for (h, tgt) in targets {
                let err = q[self.offsets[h] + t.actions[h]] - tgt;
                total += 0.5 * err * err;
                count += 1;
            }
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    fn targets(&self, t: &Transition) -> Result<Vec<(usize, f64)>> {
        let next = if t.terminal { None } else { Some(self.target.predict(&t.next_state)?) };
        Ok((0..self.head_sizes.len())
            .filter(|&h| t.active[h])
            .map(|h| {
                let future = next.as_ref().map_or(0.0, |q| {
                    q[self.offsets[h]..self.offsets[h] + self.head_sizes[h]]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                });
                (h, t.reward + self.params.gamma * future)
            })
            .collect())
    }

    /// One Adam step on a given minibatch; returns its loss before the step.
    pub fn learn_batch(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(SimError::Contract("empty minibatch".into()));
        }
        let per_sample: Vec<Vec<(usize, f64)>> = batch.iter().map(|t| self.targets(t)).collect::<Result<_>>()?;
        let count: usize = per_sample.iter().map(Vec::len).sum();
        if count == 0 {
            return Ok(0.0);
        }
        let n = count as f64;
        let mut grads = Gradients::zeros_like(&self.online);
        let mut loss = 0.0;
        let mut upstream = vec![0.0; self.online.output_len()];
        for (t, targets) in batch.iter().zip(&per_sample) {
            let cache = self.online.forward(&t.state)?;
            upstream.iter_mut().for_each(|u| *u = 0.0);
            for &(h, tgt) in targets {
                let idx = self.offsets[h] + t.actions[h];
                let err = cache.output()[idx] - tgt;
                loss += 0.5 * err * err / n;
                upstream[idx] = err / n;
            }
            self.online.backward_into(&cache, &upstream, &mut grads)?;
        }
        if !loss.is_finite() {
            return Err(SimError::Divergence(format!("non-finite DQN loss at learn step {}", self.learn_steps)));
        }
        grads.clip_global_norm(self.params.grad_clip);
        self.adam.step(&mut self.online, &grads)?;
        self.learn_steps += 1;
        if self.learn_steps % self.params.target_sync == 0 {
            self.target = self.online.clone();
        }
        Ok(loss)
    }
}
