//! Frame-level environments and the duration-execution wrapper.
//!
//! An agent decision is "hold action `a` for `d` frames". [`execute_duration`]
//! turns that into up to `d` calls to [`Environment::step`], discounting the
//! per-frame rewards inside the duration and stopping early on a terminal
//! frame.

mod chain;
mod corridor;
mod reflex;

pub use chain::ChainMdp;
pub use corridor::{CorridorWorld, CORRIDOR_LAYOUT, CORRIDOR_STARTS};
pub use reflex::ReflexTarget;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One frame of observation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvFrame {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub action_count: usize,
    pub observation_width: usize,
    pub max_frames_per_episode: usize,
}

/// The duration arms `{1, ..., d_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DurationSet {
    d_max: usize,
}

impl DurationSet {
    pub fn new(d_max: usize) -> Result<Self> {
        if d_max == 0 {
            return Err(Error::config("d_max must be at least 1"));
        }
        Ok(Self { d_max })
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn contains(&self, d: usize) -> bool {
        (1..=self.d_max).contains(&d)
    }
}

/// Result of holding one action for a duration.
#[derive(Debug, Clone, PartialEq)]
pub struct SmdpOutcome {
    pub next_observation: Vec<f64>,
    /// `sum_{k < frames_elapsed} gamma^k r_k`
    pub accumulated_reward: f64,
    /// Plain sum of per-frame rewards, used for episode scores.
    pub undiscounted_reward: f64,
    pub frames_elapsed: usize,
    pub terminal: bool,
}

pub trait Environment {
    fn spec(&self) -> EnvSpec;

    /// Starts a new episode. Deterministic in `seed`.
    fn reset(&mut self, seed: u64) -> EnvFrame;

    /// Advances one frame.
    fn step(&mut self, action: usize) -> Result<EnvFrame>;
}

/// Holds `action` for up to `duration` frames.
pub fn execute_duration<E: Environment + ?Sized>(
    env: &mut E,
    action: usize,
    duration: usize,
    gamma: f64,
) -> Result<SmdpOutcome> {
    if duration == 0 {
        return Err(Error::Usage("duration must be at least 1".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("gamma {gamma} outside (0, 1]")));
    }
    let mut accumulated = 0.0;
    let mut undiscounted = 0.0;
    let mut weight = 1.0;
    let mut frames = 0;
    loop {
        let frame = env.step(action)?;
        accumulated += weight * frame.reward;
        undiscounted += frame.reward;
        weight *= gamma;
        frames += 1;
        if frame.terminal || frames == duration {
            return Ok(SmdpOutcome {
                next_observation: frame.observation,
                accumulated_reward: accumulated,
                undiscounted_reward: undiscounted,
                frames_elapsed: frames,
                terminal: frame.terminal,
            });
        }
    }
}

/// Frame counter shared by the toy environments: tracks the hard cutoff and
/// rejects stepping a finished episode.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    frames: usize,
    max_frames: usize,
    done: bool,
}

impl EpisodeClock {
    pub(crate) fn new(max_frames: usize) -> Self {
        Self {
            frames: 0,
            max_frames,
            done: true,
        }
    }

    pub(crate) fn start(&mut self) {
        self.frames = 0;
        self.done = false;
    }

    pub(crate) fn check_running(&self, action: usize, action_count: usize) -> Result<()> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode; reset first".into()));
        }
        if action >= action_count {
            return Err(Error::Usage(format!(
                "action {action} outside 0..{action_count}"
            )));
        }
        Ok(())
    }

    /// Counts one frame; returns whether the episode is now over.
    pub(crate) fn tick(&mut self, terminal: bool) -> bool {
        self.frames += 1;
        self.done = terminal || self.frames >= self.max_frames;
        self.done
    }

    pub(crate) fn max_frames(&self) -> usize {
        self.max_frames
    }
}

pub(crate) fn one_hot(width: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    v[index] = 1.0;
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Chain,
    Corridor,
    Reflex,
}

impl EnvName {
    pub fn default_max_frames(self) -> usize {
        match self {
            EnvName::Chain => chain::DEFAULT_MAX_FRAMES,
            EnvName::Corridor => corridor::DEFAULT_MAX_FRAMES,
            EnvName::Reflex => reflex::DEFAULT_MAX_FRAMES,
        }
    }
}

impl std::fmt::Display for EnvName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EnvName::Chain => "chain",
            EnvName::Corridor => "corridor",
            EnvName::Reflex => "reflex",
        };
        f.write_str(s)
    }
}

/// Environment selection as it appears in configs, checkpoints and summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    pub name: EnvName,
    /// Hard per-episode frame cutoff; each environment has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_frames: Option<usize>,
    /// Chain only: start each episode in cell `seed % 5` rather than cell 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exploring_starts: bool,
}

impl EnvParams {
    pub fn new(name: EnvName) -> Self {
        Self {
            name,
            max_frames: None,
            exploring_starts: false,
        }
    }

    pub fn max_frames(&self) -> usize {
        self.max_frames.unwrap_or_else(|| self.name.default_max_frames())
    }

    pub fn build(&self) -> Result<AnyEnv> {
        let max_frames = self.max_frames();
        if max_frames == 0 {
            return Err(Error::config("env.max_frames must be positive"));
        }
        if self.exploring_starts && self.name != EnvName::Chain {
            return Err(Error::config("env.exploring_starts is only supported by the chain"));
        }
        Ok(match self.name {
            EnvName::Chain if self.exploring_starts => AnyEnv::Chain(ChainMdp::with_exploring_starts(max_frames)),
            EnvName::Chain => AnyEnv::Chain(ChainMdp::new(max_frames)),
            EnvName::Corridor => AnyEnv::Corridor(CorridorWorld::new(max_frames)),
            EnvName::Reflex => AnyEnv::Reflex(ReflexTarget::new(max_frames)),
        })
    }
}

#[derive(Debug, Clone)]
pub enum AnyEnv {
    Chain(ChainMdp),
    Corridor(CorridorWorld),
    Reflex(ReflexTarget),
}

impl Environment for AnyEnv {
    fn spec(&self) -> EnvSpec {
        match self {
            AnyEnv::Chain(e) => e.spec(),
            AnyEnv::Corridor(e) => e.spec(),
            AnyEnv::Reflex(e) => e.spec(),
        }
    }

    fn reset(&mut self, seed: u64) -> EnvFrame {
        match self {
            AnyEnv::Chain(e) => e.reset(seed),
            AnyEnv::Corridor(e) => e.reset(seed),
            AnyEnv::Reflex(e) => e.reset(seed),
        }
    }

    fn step(&mut self, action: usize) -> Result<EnvFrame> {
        match self {
            AnyEnv::Chain(e) => e.step(action),
            AnyEnv::Corridor(e) => e.step(action),
            AnyEnv::Reflex(e) => e.step(action),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Emits a scripted reward sequence, terminal on the last entry.
    struct Scripted {
        rewards: Vec<f64>,
        t: usize,
    }

    impl Environment for Scripted {
        fn spec(&self) -> EnvSpec {
            EnvSpec {
                action_count: 2,
                observation_width: 1,
                max_frames_per_episode: 100,
            }
        }
        fn reset(&mut self, _seed: u64) -> EnvFrame {
            self.t = 0;
            EnvFrame {
                observation: vec![0.0],
                reward: 0.0,
                terminal: false,
            }
        }
        fn step(&mut self, _action: usize) -> Result<EnvFrame> {
            let r = self.rewards.get(self.t).copied().unwrap_or(1.0);
            self.t += 1;
            Ok(EnvFrame {
                observation: vec![self.t as f64],
                reward: r,
                terminal: self.t == self.rewards.len(),
            })
        }
    }

    #[test]
    fn unit_duration_is_one_step() {
        let mut a = ChainMdp::new(50);
        let mut b = ChainMdp::new(50);
        a.reset(0);
        b.reset(0);
        let out = execute_duration(&mut a, 1, 1, 0.9).unwrap();
        let frame = b.step(1).unwrap();
        assert_eq!(out.next_observation, frame.observation);
        assert_eq!(out.accumulated_reward, frame.reward);
        assert_eq!(out.terminal, frame.terminal);
        assert_eq!(out.frames_elapsed, 1);
    }

    #[test]
    fn undiscounted_sum_over_full_duration() {
        let mut env = Scripted {
            rewards: vec![1.0; 10],
            t: 0,
        };
        env.reset(0);
        let out = execute_duration(&mut env, 0, 3, 1.0).unwrap();
        assert_eq!(out.accumulated_reward, 3.0);
        assert_eq!(out.frames_elapsed, 3);
        assert!(!out.terminal);
    }

    #[test]
    fn terminal_truncates_and_discounts() {
        let mut env = Scripted {
            rewards: vec![0.0, 0.0, 1.0],
            t: 0,
        };
        env.reset(0);
        let out = execute_duration(&mut env, 0, 5, 0.9).unwrap();
        assert!((out.accumulated_reward - 0.81).abs() < 1e-15);
        assert_eq!(out.frames_elapsed, 3);
        assert!(out.terminal);
    }

    #[test]
    fn zero_duration_is_rejected() {
        let mut env = ChainMdp::new(10);
        env.reset(0);
        assert!(matches!(execute_duration(&mut env, 0, 0, 0.9), Err(Error::Usage(_))));
    }

    #[test]
    fn duration_set_bounds() {
        assert!(DurationSet::new(0).is_err());
        let set = DurationSet::new(3).unwrap();
        assert!(set.contains(1) && set.contains(3) && !set.contains(0) && !set.contains(4));
    }
}
