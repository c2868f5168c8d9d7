use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const CHECKPOINT_FORMAT: &str = "u2usim-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One affine layer; `weights` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    #[serde(rename = "in")]
    pub inputs: usize,
    #[serde(rename = "out")]
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().copied());
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

/// Feedforward net: ReLU on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`; the last entry is the output.
    inputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients, shaped like the net.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values_mut().for_each(|v| *v *= s);
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn has_nan(&self) -> bool {
        self.values().any(|v| v.is_nan())
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.l2_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn get(&self, index: usize) -> f64 {
        *self.values().nth(index).expect("gradient index in range")
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub format: String,
    pub version: u32,
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Mlp> {
        let mut net = Mlp::zeros(sizes)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-limit..limit));
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Mlp> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(SimError::config("layer sizes", format!("need >= 2 positive sizes, got {sizes:?}")));
        }
        Ok(Mlp {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Mlp> {
        if layers.is_empty() {
            return Err(SimError::config("layers", "empty network"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 || l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(SimError::config("layers", format!("layer {i} has inconsistent shape")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(SimError::config("layers", format!("layer {i} input does not match previous output")));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    /// Parameter by flat index: layer by layer, weights then bias.
    pub fn param(&self, index: usize) -> f64 {
        *self.params().nth(index).expect("parameter index in range")
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *self.params_mut().nth(index).expect("parameter index in range") = value;
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_len() {
            return Err(SimError::Contract(format!("input of length {} for a net expecting {}", x.len(), self.input_len())));
        }
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        inputs.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.affine(inputs.last().expect("non-empty"), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(out);
        }
        Ok(ForwardCache { inputs })
    }

    /// Output only.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cur = x.to_vec();
        if cur.len() != self.input_len() {
            return Err(SimError::Contract(format!("input of length {} for a net expecting {}", x.len(), self.input_len())));
        }
        let last = self.layers.len() - 1;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut out);
        }
        Ok(cur)
    }

    /// Gradients of `upstream . output` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Mlp::backward`] but accumulates into `grads`.
    pub fn backward_into(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut Gradients) -> Result<()> {
        let shapes_ok = cache.inputs.len() == self.layers.len() + 1
            && cache.inputs.iter().zip(self.sizes()).all(|(v, n)| v.len() == n);
        if !shapes_ok {
            return Err(SimError::Contract("forward cache does not belong to this network".into()));
        }
        if upstream.len() != self.output_len() {
            return Err(SimError::Contract(format!(
                "upstream gradient of length {} for {} outputs",
                upstream.len(),
                self.output_len()
            )));
        }
        let mut delta = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &xi) in row.iter_mut().zip(x) {
                    *gw += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            // x is the ReLU output of the previous layer; x > 0 iff the unit was active.
            let mut next = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            for (n, &xi) in next.iter_mut().zip(x) {
                if xi <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
        Ok(())
    }

    /// `params += scale * grads`.
    pub fn apply_scaled(&mut self, grads: &Gradients, scale: f64) {
        for (p, g) in self.params_mut().zip(grads.values()) {
            *p += scale * g;
        }
    }

    pub fn to_checkpoint(&self) -> MlpCheckpoint {
        MlpCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layers: self.layers.clone(),
        }
    }

    pub fn from_checkpoint(ck: MlpCheckpoint) -> Result<Mlp> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(SimError::config("checkpoint.format", format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(SimError::config("checkpoint.version", format!("unsupported version {}", ck.version)));
        }
        Mlp::from_layers(ck.layers)
    }
}
