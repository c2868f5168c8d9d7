//! Discrete-time simulator of UAV-to-UAV live video streaming over a dynamic
//! wildfire scenario.
//!
//! A single aerial base station (UAV-BS) collects uplink video from camera
//! UAVs (UAV-UEs) circling fire areas. Every transmission time interval (TTI)
//! a decision agent picks the BS move, each UE's move, a video resolution per
//! fire area and a maximum transmit power per UE. The environment turns those
//! choices into link budgets, frame delays and a QoE reward.
//!
//! Layout:
//! - [`scenario`]: grid world, fire arrivals, flying regions, move legality.
//! - [`channel`]: pathloss, Rician fading, power control, SINR and rate.
//! - [`video_qoe`]: resolution ladder, frame timing, quality and reward.
//! - [`env`]: the MDP with a factorized action space.
//! - [`nn`]: a small MLP with manual backprop, Adam and a replay buffer.
//! - [`agents`]: Greedy, tabular Q-learning, DQN and Actor-Critic.
//! - [`harness`]: experiment config, training/eval loops and metric export.

pub mod agents;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod scenario;
pub mod video_qoe;

pub use error::{Result, SimError};
