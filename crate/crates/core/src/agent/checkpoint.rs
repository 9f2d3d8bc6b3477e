use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig, DurationRule, UpdateCounters};
use crate::envs::EnvParams;
use crate::error::{Error, Result};
use crate::nnet::{NetworkParams, NetworkRecord};
use crate::rng::{RngStreams, StreamState};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Everything needed to rebuild an agent and resume its random streams.
/// The replay memory is not saved.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub run_seed: u64,
    pub family: DurationRule,
    pub env: EnvParams,
    pub action_count: usize,
    pub observation_width: usize,
    pub hyperparameters: AgentConfig,
    pub epsilon: f64,
    pub bandit_baseline: f64,
    pub counters: UpdateCounters,
    pub online: NetworkRecord,
    pub target: NetworkRecord,
    #[serde(default)]
    pub rng_streams: Vec<StreamState>,
}

impl Checkpoint {
    pub fn capture(agent: &Agent, env: EnvParams, run_seed: u64, streams: Option<&RngStreams>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            run_seed,
            family: agent.rule().clone(),
            env,
            action_count: agent.action_count(),
            observation_width: agent.observation_width(),
            hyperparameters: agent.config().clone(),
            epsilon: agent.epsilon(),
            bandit_baseline: agent.bandit_baseline(),
            counters: agent.counters(),
            online: agent.online().to_record(),
            target: agent.target().to_record(),
            rng_streams: streams.map(RngStreams::snapshot).unwrap_or_default(),
        }
    }

    pub fn agent(&self) -> Result<Agent> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Incompatible(format!(
                "checkpoint format_version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let online = NetworkParams::from_record(self.online.clone())?;
        let target = NetworkParams::from_record(self.target.clone())?;
        if online.input_width() != self.observation_width {
            return Err(Error::Dimension {
                context: "checkpoint observation width",
                expected: self.observation_width,
                actual: online.input_width(),
            });
        }
        let mut agent = Agent::from_parts(
            self.family.clone(),
            self.hyperparameters.clone(),
            self.action_count,
            online,
            target,
        )?;
        agent.restore_state(self.epsilon, self.bandit_baseline, self.counters);
        Ok(agent)
    }

    /// Stream positions at save time, if they were recorded.
    pub fn streams(&self) -> Result<Option<RngStreams>> {
        if self.rng_streams.is_empty() {
            return Ok(None);
        }
        RngStreams::restore(&self.rng_streams).map(Some)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let checkpoint: Self = serde_json::from_str(&text)?;
        if checkpoint.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Incompatible(format!(
                "{}: checkpoint format_version {}",
                path.display(),
                checkpoint.format_version
            )));
        }
        Ok(checkpoint)
    }
}
