//! Feedforward nets with hand-written backprop, Adam, replay and softmax.

mod adam;
mod mlp;
mod replay;
mod softmax;

pub use adam::AdamState;
pub use mlp::{ForwardCache, Gradients, Layer, Mlp, MlpCheckpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use replay::{ReplayBuffer, Transition, DEFAULT_CAPACITY};
pub use softmax::{argmax, grad_log_prob, log_softmax, softmax};

/// Global gradient-norm bound used by the learning agents.
pub const GRAD_CLIP_NORM: f64 = 10.0;
