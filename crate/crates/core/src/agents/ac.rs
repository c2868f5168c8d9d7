use rand::Rng;
use serde::{Deserialize, Serialize};

use super::explore::head_offsets;
use crate::error::{Result, SimError};
use crate::nn::{argmax, grad_log_prob, softmax, Mlp, GRAD_CLIP_NORM};
use crate::rng::{stream, SimRng, Stream};

/// How the TD error combines the critic's two estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdForm {
    /// `r + gamma (V(s') - V(s))`.
    Scaled,
    /// `r + gamma V(s') - V(s)`.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticKind {
    Mlp,
    /// `V(s) = w . s + b`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcParams {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub critic: CriticKind,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub td_form: TdForm,
    pub grad_clip: f64,
}

impl Default for AcParams {
    fn default() -> Self {
        AcParams {
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            critic: CriticKind::Mlp,
            actor_lr: 0.001,
            critic_lr: 0.01,
            gamma: 0.8,
            td_form: TdForm::Scaled,
            grad_clip: GRAD_CLIP_NORM,
        }
    }
}

impl AcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.actor_lr > 0.0 && self.actor_lr <= 1.0) {
            return Err(SimError::config("agent.ac.actor_lr", "must lie in (0, 1]"));
        }
        if !(self.critic_lr > 0.0 && self.critic_lr <= 1.0) {
            return Err(SimError::config("agent.ac.critic_lr", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(SimError::config("agent.ac.gamma", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcStats {
    pub td_error: f64,
    /// `-delta * sum(ln pi)` over the active heads.
    pub actor_loss: f64,
}

/// Softmax actor with one head per sub-action and a state-value critic,
/// both trained online from each transition.
#[derive(Debug, Clone)]
pub struct AcLearner {
    pub params: AcParams,
    head_sizes: Vec<usize>,
    offsets: Vec<usize>,
    actor: Mlp,
    critic: Mlp,
    explore_rng: SimRng,
}

impl AcLearner {
    pub fn new(state_len: usize, head_sizes: Vec<usize>, params: AcParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut init = stream(seed, Stream::Init);
        let mut actor_sizes = vec![state_len];
        actor_sizes.extend(&params.actor_hidden);
        actor_sizes.push(head_sizes.iter().sum());
        let critic_sizes: Vec<usize> = match params.critic {
            CriticKind::Mlp => std::iter::once(state_len).chain(params.critic_hidden.iter().copied()).chain([1]).collect(),
            CriticKind::Linear => vec![state_len, 1],
        };
        let actor = Mlp::new(&actor_sizes, &mut init)?;
        let critic = Mlp::new(&critic_sizes, &mut init)?;
        Ok(AcLearner {
            offsets: head_offsets(&head_sizes),
            head_sizes,
            actor,
            critic,
            explore_rng: stream(seed, Stream::Exploration),
            params,
        })
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn set_networks(&mut self, actor: Mlp, critic: Mlp) -> Result<()> {
        if actor.sizes() != self.actor.sizes() || critic.sizes() != self.critic.sizes() {
            return Err(SimError::config("checkpoint", "network shape does not match the configuration"));
        }
        self.actor = actor;
        self.critic = critic;
        Ok(())
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.critic.predict(state)?[0])
    }

    /// Per-head action distributions.
    pub fn policy(&self, state: &[f64]) -> Result<Vec<Vec<f64>>> {
        let logits = self.actor.predict(state)?;
        Ok(self
            .offsets
            .iter()
            .zip(&self.head_sizes)
            .map(|(&off, &n)| softmax(&logits[off..off + n]))
            .collect())
    }

    /// Samples each active head from its distribution, or takes its mode
    /// when `greedy`. Inactive heads get 0.
    pub fn select(&mut self, state: &[f64], mask: &[bool], greedy: bool) -> Result<Vec<usize>> {
        let policy = self.policy(state)?;
        Ok(policy
            .iter()
            .zip(mask)
            .map(|(p, &active)| {
                if !active {
                    0
                } else if greedy {
                    argmax(p)
                } else {
                    sample_categorical(p, self.explore_rng.random::<f64>())
                }
            })
            .collect())
    }

    pub fn td_error(&self, reward: f64, v_s: f64, v_next: f64) -> f64 {
        let g = self.params.gamma;
        match self.params.td_form {
            TdForm::Scaled => reward + g * (v_next - v_s),
            TdForm::Standard => reward + g * v_next - v_s,
        }
    }

    /// One on-policy update from `(s, a, r, s')`.
    pub fn learn(&mut self, state: &[f64], actions: &[usize], mask: &[bool], reward: f64, next: &[f64], terminal: bool) -> Result<AcStats> {
        let critic_cache = self.critic.forward(state)?;
        let v_s = critic_cache.output()[0];
        let v_next = if terminal { 0.0 } else { self.value(next)? };
        let delta = self.td_error(reward, v_s, v_next);
        if !delta.is_finite() {
            return Err(SimError::Divergence(format!("non-finite TD error (V(s) = {v_s}, V(s') = {v_next})")));
        }

        let actor_cache = self.actor.forward(state)?;
        let logits = actor_cache.output();
        let mut upstream = vec![0.0; logits.len()];
        let mut log_pi = 0.0;
        for (h, (&a, &active)) in actions.iter().zip(mask).enumerate() {
            if !active {
                continue;
            }
            let (off, n) = (self.offsets[h], self.head_sizes[h]);
            let p = softmax(&logits[off..off + n]);
            log_pi += p[a].ln();
            upstream[off..off + n].copy_from_slice(&grad_log_prob(&p, a));
        }

        if delta != 0.0 {
            let mut critic_step = self.critic.backward(&critic_cache, &[delta])?;
            critic_step.clip_global_norm(self.params.grad_clip);
            self.critic.apply_scaled(&critic_step, self.params.critic_lr);

            let mut actor_step = self.actor.backward(&actor_cache, &upstream)?;
            actor_step.scale(delta);
            actor_step.clip_global_norm(self.params.grad_clip);
            self.actor.apply_scaled(&actor_step, self.params.actor_lr);

            if !self.actor.is_finite() || !self.critic.is_finite() {
                return Err(SimError::Divergence("non-finite actor or critic parameter".into()));
            }
        }
        Ok(AcStats {
            td_error: delta,
            actor_loss: -delta * log_pi,
        })
    }
}

/// Inverse-CDF draw; `u` in `[0, 1)`.
pub fn sample_categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}
