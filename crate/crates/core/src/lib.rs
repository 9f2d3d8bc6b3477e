//! DQN with a contextual-bandit duration head.
//!
//! At each decision the agent picks an action from its Q head and a hold
//! duration from a softmax bandit head, runs the action for that many frames,
//! and learns the Q head with a semi-MDP TD target and the duration head with
//! a policy gradient on the Q-value improvement over the duration.
//!
//! Modules:
//! - [`nnet`]: dense networks with manual backprop and JSON records
//! - [`replay`]: SMDP transition ring buffer
//! - [`envs`]: frame-level toy environments and duration execution
//! - [`agent`]: the bandit agent, its training loop and checkpoints
//! - [`baselines`]: fixed-repetition and (action, duration)-pair agents
//! - [`harness`]: configs, multi-seed runs, reports

pub mod agent;
pub mod baselines;
pub mod envs;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nnet;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
