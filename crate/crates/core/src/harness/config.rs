//! TOML experiment configs.
//!
//! ```toml
//! seeds = [0, 1, 2]
//! output_dir = "runs/corridor-bandit"
//!
//! [env]
//! name = "corridor"          # chain | corridor | reflex
//!
//! [agent]
//! family = "bandit"          # bandit | static | dfdqn
//! d_max = 10
//!
//! [training]
//! decisions = 20000
//! eval_interval = 5000
//!
//! [report]
//! duration_buckets = [[1, 3], [4, 6], [7, 10]]
//! ```
//!
//! Every key is optional except `env.name`. Unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, DurationRule, EpsilonSchedule, TrainSchedule};
use crate::envs::EnvParams;
use crate::error::{Error, Result};

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "BANDIT_DQN_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bandit,
    Static,
    Dfdqn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub family: Family,
    /// Bandit family only.
    pub d_max: usize,
    /// Static family only.
    pub arr: usize,
    /// Dfdqn family only.
    pub duration_options: Vec<usize>,
    pub gamma: f64,
    pub learning_rate_q: f64,
    pub learning_rate_bandit: f64,
    pub target_sync_interval: u64,
    pub trunk_hidden: Vec<usize>,
    pub q_hidden: Vec<usize>,
    pub duration_hidden: Vec<usize>,
    pub bandit_trains_trunk: bool,
    pub bandit_baseline_rate: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        let shared = AgentConfig::default();
        Self {
            family: Family::Bandit,
            d_max: 10,
            arr: 1,
            duration_options: vec![2, 8],
            gamma: shared.gamma,
            learning_rate_q: shared.learning_rate_q,
            learning_rate_bandit: shared.learning_rate_bandit,
            target_sync_interval: shared.target_sync_interval,
            trunk_hidden: shared.trunk_hidden,
            q_hidden: shared.q_hidden,
            duration_hidden: shared.duration_hidden,
            bandit_trains_trunk: shared.bandit_trains_trunk,
            bandit_baseline_rate: shared.bandit_baseline_rate,
        }
    }
}

impl AgentSection {
    pub fn rule(&self) -> DurationRule {
        match self.family {
            Family::Bandit => DurationRule::Bandit { d_max: self.d_max },
            Family::Static => DurationRule::Static { arr: self.arr },
            Family::Dfdqn => DurationRule::Discrete {
                options: self.duration_options.clone(),
            },
        }
    }

    pub fn shared(&self) -> AgentConfig {
        AgentConfig {
            gamma: self.gamma,
            learning_rate_q: self.learning_rate_q,
            learning_rate_bandit: self.learning_rate_bandit,
            target_sync_interval: self.target_sync_interval,
            trunk_hidden: self.trunk_hidden.clone(),
            q_hidden: self.q_hidden.clone(),
            duration_hidden: self.duration_hidden.clone(),
            bandit_trains_trunk: self.bandit_trains_trunk,
            bandit_baseline_rate: self.bandit_baseline_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Total decision budget per run.
    pub decisions: u64,
    /// Decisions between evaluation rounds; 0 evaluates only at the end.
    pub eval_interval: u64,
    pub eval_episodes: u32,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_decisions: u64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub learning_starts: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let s = TrainSchedule::default();
        Self {
            decisions: 20_000,
            eval_interval: 5_000,
            eval_episodes: 20,
            epsilon_start: s.epsilon.start,
            epsilon_end: s.epsilon.end,
            epsilon_decay_decisions: s.epsilon.decay_decisions,
            replay_capacity: s.replay_capacity,
            batch_size: s.batch_size,
            learning_starts: s.learning_starts,
        }
    }
}

impl TrainingSection {
    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            epsilon: EpsilonSchedule {
                start: self.epsilon_start,
                end: self.epsilon_end,
                decay_decisions: self.epsilon_decay_decisions,
            },
            replay_capacity: self.replay_capacity,
            batch_size: self.batch_size,
            learning_starts: self.learning_starts,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Inclusive `[lo, hi]` duration ranges for short, medium and long.
    /// Defaults to thirds of the family's maximum duration.
    pub duration_buckets: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub env: EnvParams,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub report: ReportSection,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Every range problem at once, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.seeds.is_empty() {
            v.push("seeds must not be empty".to_string());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            v.push("seeds must be distinct".to_string());
        }
        if let Err(Error::Config(msgs)) = self.env.build() {
            v.extend(msgs);
        }
        let a = &self.agent;
        match a.family {
            Family::Bandit if a.d_max == 0 => v.push("agent.d_max must be >= 1".into()),
            Family::Static if a.arr == 0 => v.push("agent.arr must be >= 1".into()),
            Family::Dfdqn => {
                if let Err(Error::Config(msgs)) = a.rule().validate() {
                    v.extend(msgs.into_iter().map(|m| format!("agent.{m}")));
                }
            }
            _ => {}
        }
        v.extend(a.shared().violations());
        let t = &self.training;
        if t.decisions == 0 {
            v.push("training.decisions must be >= 1".into());
        }
        if t.eval_episodes == 0 {
            v.push("training.eval_episodes must be >= 1".into());
        }
        v.extend(t.schedule().violations());
        if self.report.duration_buckets.is_some() {
            if let Err(e) = self.buckets() {
                v.push(format!("report.duration_buckets: {e}"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn rule(&self) -> DurationRule {
        self.agent.rule()
    }

    pub fn buckets(&self) -> Result<super::DurationBuckets> {
        let d_max = self.rule().max_duration();
        match &self.report.duration_buckets {
            Some(ranges) => super::DurationBuckets::from_ranges(ranges, d_max),
            None => super::DurationBuckets::thirds(d_max),
        }
    }

    /// Applies the output-directory environment override, if set.
    pub fn apply_env_override(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::parse(&text)
}
