//! The decision loop: act, execute the duration, store, learn.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, BanditStep, Decision};
use crate::envs::{execute_duration, Environment, SmdpOutcome};
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecord, Phase, METRICS_FORMAT_VERSION};
use crate::replay::{ReplayMemory, Transition};
use crate::rng::RngStreams;

/// Linear anneal from `start` to `end` over `decay_decisions`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_decisions: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, decisions_done: u64) -> f64 {
        if self.decay_decisions == 0 || decisions_done >= self.decay_decisions {
            return self.end;
        }
        let frac = decisions_done as f64 / self.decay_decisions as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Replay and exploration settings for one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub epsilon: EpsilonSchedule,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// TD updates start once the memory holds this many transitions
    /// (never fewer than `batch_size`).
    pub learning_starts: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_decisions: 10_000,
            },
            replay_capacity: 10_000,
            batch_size: 32,
            learning_starts: 200,
        }
    }
}

impl TrainSchedule {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, e) in [("start", self.epsilon.start), ("end", self.epsilon.end)] {
            if !(0.0..=1.0).contains(&e) {
                v.push(format!("training.epsilon_{name} = {e} must lie in [0, 1]"));
            }
        }
        if self.replay_capacity == 0 {
            v.push("training.replay_capacity must be >= 1".into());
        }
        if self.batch_size == 0 {
            v.push("training.batch_size must be >= 1".into());
        }
        if self.batch_size > self.replay_capacity {
            v.push(format!(
                "training.batch_size = {} exceeds replay_capacity = {}",
                self.batch_size, self.replay_capacity
            ));
        }
        v
    }
}

/// What happened at one decision step.
#[derive(Debug, Clone, Copy)]
pub struct StepLog<'a> {
    /// 0-based decision index over the whole run.
    pub index: u64,
    pub state: &'a [f64],
    pub decision: Decision,
    pub outcome: &'a SmdpOutcome,
    pub bandit_reward: f64,
    pub td_loss: Option<f64>,
}

pub trait TrainObserver {
    fn on_step(&mut self, log: &StepLog<'_>);
}

/// Owned copy of a [`StepLog`], handy for trajectory comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: u64,
    pub state: Vec<f64>,
    pub decision: Decision,
    pub accumulated_reward: f64,
    pub frames_elapsed: usize,
    pub terminal: bool,
    pub bandit_reward: f64,
    pub td_loss: Option<f64>,
}

impl TrainObserver for Vec<StepRecord> {
    fn on_step(&mut self, log: &StepLog<'_>) {
        self.push(StepRecord {
            index: log.index,
            state: log.state.to_vec(),
            decision: log.decision,
            accumulated_reward: log.outcome.accumulated_reward,
            frames_elapsed: log.outcome.frames_elapsed,
            terminal: log.outcome.terminal,
            bandit_reward: log.bandit_reward,
            td_loss: log.td_loss,
        });
    }
}

struct NoObserver;

impl TrainObserver for NoObserver {
    fn on_step(&mut self, _: &StepLog<'_>) {}
}

#[derive(Debug, Clone)]
struct EpisodeProgress {
    state: Vec<f64>,
    score: f64,
    frames: u64,
    decisions: u64,
    histogram: Vec<u64>,
    loss_sum: f64,
    loss_count: u64,
    skipped_at_start: u64,
    dropped_at_start: u64,
}

/// Runs the training loop for one seed.
///
/// Episode progress carries over between [`Trainer::advance`] calls, so a
/// budget can be split into evaluation periods. An episode still running
/// when training stops produces no record.
pub struct Trainer<E> {
    agent: Agent,
    env: E,
    replay: ReplayMemory,
    streams: RngStreams,
    schedule: TrainSchedule,
    run_seed: u64,
    episode: Option<EpisodeProgress>,
    episodes_done: u64,
}

impl<E: Environment> Trainer<E> {
    /// Builds the agent from the init stream of `run_seed`.
    pub fn new(
        rule: super::DurationRule,
        config: super::AgentConfig,
        schedule: TrainSchedule,
        env: E,
        run_seed: u64,
    ) -> Result<Self> {
        let mut streams = RngStreams::new(run_seed);
        let agent = Agent::new(rule, config, env.spec(), &mut streams.init)?;
        Self::from_agent(agent, schedule, env, run_seed, streams)
    }

    /// Resumes from an existing agent and stream positions. Replay starts empty.
    pub fn from_agent(
        agent: Agent,
        schedule: TrainSchedule,
        env: E,
        run_seed: u64,
        streams: RngStreams,
    ) -> Result<Self> {
        let problems = schedule.violations();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let spec = env.spec();
        if spec.observation_width != agent.observation_width() {
            return Err(Error::Dimension {
                context: "environment observation",
                expected: agent.observation_width(),
                actual: spec.observation_width,
            });
        }
        if spec.action_count != agent.action_count() {
            return Err(Error::Dimension {
                context: "environment actions",
                expected: agent.action_count(),
                actual: spec.action_count,
            });
        }
        let replay = ReplayMemory::new(schedule.replay_capacity, agent.rule().max_duration())?;
        Ok(Self {
            agent,
            env,
            replay,
            streams,
            schedule,
            run_seed,
            episode: None,
            episodes_done: 0,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn streams(&self) -> &RngStreams {
        &self.streams
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    /// Runs `decisions` decision steps; returns records for episodes that
    /// finished during the call.
    pub fn advance(&mut self, decisions: u64) -> Result<Vec<MetricsRecord>> {
        self.advance_observed(decisions, &mut NoObserver)
    }

    pub fn advance_observed(
        &mut self,
        decisions: u64,
        observer: &mut dyn TrainObserver,
    ) -> Result<Vec<MetricsRecord>> {
        let mut finished = Vec::new();
        for _ in 0..decisions {
            if let Some(record) = self.step(observer)? {
                finished.push(record);
            }
        }
        Ok(finished)
    }

    fn start_episode(&mut self) -> EpisodeProgress {
        let seed: u64 = self.streams.env.gen();
        let frame = self.env.reset(seed);
        let counters = self.agent.counters();
        EpisodeProgress {
            state: frame.observation,
            score: 0.0,
            frames: 0,
            decisions: 0,
            histogram: vec![0; self.agent.rule().max_duration()],
            loss_sum: 0.0,
            loss_count: 0,
            skipped_at_start: counters.skipped_td_updates + counters.skipped_bandit_updates,
            dropped_at_start: counters.dropped_transitions,
        }
    }

    fn step(&mut self, observer: &mut dyn TrainObserver) -> Result<Option<MetricsRecord>> {
        let mut ep = match self.episode.take() {
            Some(ep) => ep,
            None => self.start_episode(),
        };
        let index = self.agent.counters().decisions;
        self.agent.set_epsilon(self.schedule.epsilon.value(index));

        let decision = self.agent.decide(
            &ep.state,
            &mut self.streams.exploration,
            &mut self.streams.duration,
        )?;
        let gamma = self.agent.config().gamma;
        let outcome = execute_duration(&mut self.env, decision.action, decision.duration, gamma)?;
        let bandit_reward = if self.agent.rule().is_bandit() {
            self.agent
                .outcome_bandit_reward(&ep.state, decision.q_index, &outcome)?
        } else {
            0.0
        };
        self.replay.push(Transition {
            state: ep.state.clone(),
            action: decision.q_index,
            duration: decision.duration,
            reward: outcome.accumulated_reward,
            next_state: outcome.next_observation.clone(),
            frames_elapsed: outcome.frames_elapsed,
            terminal: outcome.terminal,
            bandit_reward,
        })?;

        let ready = self.schedule.learning_starts.max(self.schedule.batch_size);
        let mut td_loss = None;
        if self.replay.len() >= ready {
            let batch = self.replay.sample(self.schedule.batch_size, &mut self.streams.replay)?;
            td_loss = self.agent.td_update(&batch)?.loss;
        }
        if self.agent.rule().is_bandit() {
            // The clamp case is a legitimate zero gradient, not a failure.
            let _: BanditStep = self.agent.bandit_update(&ep.state, decision.duration, bandit_reward)?;
        }
        self.agent.record_decision();

        observer.on_step(&StepLog {
            index,
            state: &ep.state,
            decision,
            outcome: &outcome,
            bandit_reward,
            td_loss,
        });

        ep.score += outcome.undiscounted_reward;
        ep.frames += outcome.frames_elapsed as u64;
        ep.decisions += 1;
        ep.histogram[decision.duration - 1] += 1;
        if let Some(loss) = td_loss {
            ep.loss_sum += loss;
            ep.loss_count += 1;
        }

        if !outcome.terminal {
            ep.state = outcome.next_observation;
            self.episode = Some(ep);
            return Ok(None);
        }
        let counters = self.agent.counters();
        let record = MetricsRecord {
            format_version: METRICS_FORMAT_VERSION,
            phase: Phase::Train,
            run_seed: self.run_seed,
            round: None,
            episode: self.episodes_done,
            score: ep.score,
            frames: ep.frames,
            decisions: ep.decisions,
            mean_td_loss: (ep.loss_count > 0).then(|| ep.loss_sum / ep.loss_count as f64),
            duration_histogram: ep.histogram,
            epsilon: self.agent.epsilon(),
            skipped_updates: counters.skipped_td_updates + counters.skipped_bandit_updates
                - ep.skipped_at_start,
            dropped_transitions: counters.dropped_transitions - ep.dropped_at_start,
        };
        self.episodes_done += 1;
        Ok(Some(record))
    }
}
