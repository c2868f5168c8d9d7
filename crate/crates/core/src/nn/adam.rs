use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Result, SimError};

/// Bias-corrected Adam, one moment pair per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let n = net.num_params();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// Descends along `grads`. A NaN gradient leaves the net untouched and
    /// reports divergence.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if self.m.len() != net.num_params() {
            return Err(SimError::Contract("optimizer state does not match the network".into()));
        }
        if grads.has_nan() {
            return Err(SimError::Divergence(format!("NaN gradient at optimizer step {}", self.t + 1)));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut i = 0;
        for (layer, glayer) in net.layers_mut().iter_mut().zip(&grads.layers) {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = glayer.weights.iter().chain(&glayer.bias);
            for (p, &g) in params.zip(gs) {
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[i] / c1;
                let v_hat = self.v[i] / c2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                i += 1;
            }
        }
        if !net.is_finite() {
            return Err(SimError::Divergence(format!("non-finite parameter after optimizer step {}", self.t)));
        }
        Ok(())
    }
}
