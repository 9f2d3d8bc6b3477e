//! Bandit-DQN agent.
//!
//! A Q head picks the action (epsilon-greedy) and a softmax duration head
//! picks how many frames to hold it. The duration head is trained as a
//! contextual bandit: its reward is the change in Q-value across the executed
//! duration,
//!
//! ```text
//! r_b = max_a' Q(s_{t+d}, a') - Q(s_t, a_t)
//! ```
//!
//! and it follows the score-function gradient `r_b * grad log pi_b(d | s)`.
//! The Q path is trained with a semi-MDP TD target that discounts by
//! `gamma^frames_elapsed`.
//!
//! The same [`Agent`] type also carries the static-duration and
//! discrete-duration baselines; only [`DurationRule`] differs.

mod checkpoint;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use train::{EpsilonSchedule, StepLog, StepRecord, TrainObserver, TrainSchedule, Trainer};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, SmdpOutcome};
use crate::error::{Error, Result};
use crate::nnet::{backward, backward_accumulate, forward, sgd_step, softmax, GradientBundle, NetworkParams};
use crate::replay::Transition;

/// Lower clamp for `log pi_b` when forming the bandit gradient.
pub const LOG_PROB_FLOOR: f64 = -27.631_021_115_928_547; // ln(1e-12)

/// How an agent family chooses durations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DurationRule {
    /// Duration sampled from the bandit head over `1..=d_max`.
    Bandit { d_max: usize },
    /// Every action held for `arr` frames.
    Static { arr: usize },
    /// Q head over (action, duration option) pairs, action-major.
    Discrete { options: Vec<usize> },
}

impl DurationRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            DurationRule::Bandit { d_max: 0 } => Err(Error::config("d_max must be at least 1")),
            DurationRule::Static { arr: 0 } => Err(Error::config("arr must be at least 1")),
            DurationRule::Discrete { options } => {
                if options.is_empty() {
                    return Err(Error::config("duration_options must not be empty"));
                }
                if options[0] == 0 || options.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::config(
                        "duration_options must be positive and strictly increasing",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest duration the family can emit; histograms cover `1..=this`.
    pub fn max_duration(&self) -> usize {
        match self {
            DurationRule::Bandit { d_max } => *d_max,
            DurationRule::Static { arr } => *arr,
            DurationRule::Discrete { options } => options.last().copied().unwrap_or(1),
        }
    }

    pub fn q_width(&self, action_count: usize) -> usize {
        match self {
            DurationRule::Discrete { options } => action_count * options.len(),
            _ => action_count,
        }
    }

    pub fn is_bandit(&self) -> bool {
        matches!(self, DurationRule::Bandit { .. })
    }

    /// Short label used in summaries and reports.
    pub fn label(&self) -> String {
        match self {
            DurationRule::Bandit { d_max } => format!("bandit-dqn(d_max={d_max})"),
            DurationRule::Static { arr } => format!("static-arr({arr})"),
            DurationRule::Discrete { options } => {
                let opts: Vec<String> = options.iter().map(ToString::to_string).collect();
                format!("dfdqn({})", opts.join(","))
            }
        }
    }
}

/// Hyperparameters shared by every family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate_q: f64,
    pub learning_rate_bandit: f64,
    pub target_sync_interval: u64,
    pub trunk_hidden: Vec<usize>,
    pub q_hidden: Vec<usize>,
    pub duration_hidden: Vec<usize>,
    /// Let the bandit gradient flow into the shared trunk.
    pub bandit_trains_trunk: bool,
    /// Step size of a running-mean baseline subtracted from `r_b`; 0 disables it.
    pub bandit_baseline_rate: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate_q: 0.05,
            learning_rate_bandit: 0.02,
            target_sync_interval: 200,
            trunk_hidden: vec![64],
            q_hidden: Vec::new(),
            duration_hidden: vec![32],
            bandit_trains_trunk: false,
            bandit_baseline_rate: 0.0,
        }
    }
}

impl AgentConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            v.push(format!("agent.gamma = {} must lie in (0, 1]", self.gamma));
        }
        if !(self.learning_rate_q > 0.0 && self.learning_rate_q.is_finite()) {
            v.push(format!("agent.learning_rate_q = {} must be > 0", self.learning_rate_q));
        }
        if !(self.learning_rate_bandit >= 0.0 && self.learning_rate_bandit.is_finite()) {
            v.push(format!(
                "agent.learning_rate_bandit = {} must be >= 0",
                self.learning_rate_bandit
            ));
        }
        if self.target_sync_interval == 0 {
            v.push("agent.target_sync_interval must be >= 1".into());
        }
        for (name, sizes) in [
            ("trunk_hidden", &self.trunk_hidden),
            ("q_hidden", &self.q_hidden),
            ("duration_hidden", &self.duration_hidden),
        ] {
            if sizes.contains(&0) {
                v.push(format!("agent.{name} entries must be >= 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.bandit_baseline_rate) {
            v.push(format!(
                "agent.bandit_baseline_rate = {} must lie in [0, 1]",
                self.bandit_baseline_rate
            ));
        }
        v
    }
}

/// `pi_b(d | s)` over durations `1..=d_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationPolicy {
    probs: Vec<f64>,
}

impl DurationPolicy {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        Ok(Self {
            probs: softmax(logits)?,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn d_max(&self) -> usize {
        self.probs.len()
    }

    /// Probability of duration `d` (1-based).
    pub fn prob(&self, d: usize) -> f64 {
        self.probs[d - 1]
    }

    /// Inverse-CDF draw; always consumes exactly one `f64` from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        self.probs.len()
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One agent decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    /// Index into the Q head.
    pub q_index: usize,
    /// Environment action.
    pub action: usize,
    pub duration: usize,
}

/// Running totals of update outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounters {
    pub decisions: u64,
    pub td_updates: u64,
    pub skipped_td_updates: u64,
    pub dropped_transitions: u64,
    pub bandit_updates: u64,
    pub skipped_bandit_updates: u64,
    pub target_syncs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdStep {
    /// Mean squared TD error before the step; `None` if every entry was dropped.
    pub loss: Option<f64>,
    pub dropped: usize,
    pub applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BanditStep {
    Applied,
    /// `log pi_b(d)` sat below the clamp, so the gradient is zero.
    Clamped,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct Agent {
    rule: DurationRule,
    config: AgentConfig,
    action_count: usize,
    observation_width: usize,
    online: NetworkParams,
    target: NetworkParams,
    epsilon: f64,
    baseline: f64,
    counters: UpdateCounters,
}

impl Agent {
    /// Builds the online network from `init_rng` and copies its Q path into
    /// the target network.
    pub fn new<R: Rng + ?Sized>(
        rule: DurationRule,
        config: AgentConfig,
        spec: EnvSpec,
        init_rng: &mut R,
    ) -> Result<Self> {
        rule.validate()?;
        let problems = config.violations();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        if spec.action_count < 2 || spec.observation_width == 0 {
            return Err(Error::config("environment needs >= 2 actions and a non-empty observation"));
        }
        let duration = match &rule {
            DurationRule::Bandit { d_max } => Some((config.duration_hidden.as_slice(), *d_max)),
            _ => None,
        };
        let online = NetworkParams::init(
            spec.observation_width,
            &config.trunk_hidden,
            &config.q_hidden,
            rule.q_width(spec.action_count),
            duration,
            init_rng,
        )?;
        Self::from_parts(rule, config, spec.action_count, online.clone(), online.q_path())
    }

    /// Assembles an agent from explicit networks; used by checkpoints and tests.
    pub fn from_parts(
        rule: DurationRule,
        config: AgentConfig,
        action_count: usize,
        online: NetworkParams,
        target: NetworkParams,
    ) -> Result<Self> {
        rule.validate()?;
        let q_width = rule.q_width(action_count);
        if online.q_width() != q_width || target.q_width() != q_width {
            return Err(Error::Dimension {
                context: "q head width",
                expected: q_width,
                actual: online.q_width(),
            });
        }
        if target.input_width() != online.input_width() {
            return Err(Error::Dimension {
                context: "target network input",
                expected: online.input_width(),
                actual: target.input_width(),
            });
        }
        match (&rule, online.duration_width()) {
            (DurationRule::Bandit { d_max }, Some(w)) if w == *d_max => {}
            (DurationRule::Bandit { d_max }, w) => {
                return Err(Error::Dimension {
                    context: "duration head width",
                    expected: *d_max,
                    actual: w.unwrap_or(0),
                })
            }
            (_, Some(_)) => return Err(Error::config("only the bandit family has a duration head")),
            _ => {}
        }
        Ok(Self {
            rule,
            config,
            action_count,
            observation_width: online.input_width(),
            online,
            target,
            epsilon: 1.0,
            baseline: 0.0,
            counters: UpdateCounters::default(),
        })
    }

    pub fn rule(&self) -> &DurationRule {
        &self.rule
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn observation_width(&self) -> usize {
        self.observation_width
    }

    pub fn online(&self) -> &NetworkParams {
        &self.online
    }

    /// Direct access for tests and hand-built scenarios.
    pub fn online_mut(&mut self) -> &mut NetworkParams {
        &mut self.online
    }

    pub fn target(&self) -> &NetworkParams {
        &self.target
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    pub fn counters(&self) -> UpdateCounters {
        self.counters
    }

    pub fn bandit_baseline(&self) -> f64 {
        self.baseline
    }

    pub(crate) fn restore_state(&mut self, epsilon: f64, baseline: f64, counters: UpdateCounters) {
        self.epsilon = epsilon;
        self.baseline = baseline;
        self.counters = counters;
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        let q = self.online.q_values(state)?;
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("q values"));
        }
        Ok(q)
    }

    pub fn target_q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.target.q_values(state)
    }

    /// Epsilon-greedy over the Q head. Always draws one uniform number, plus
    /// one index when exploring.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<usize> {
        let q = self.q_values(state)?;
        let u: f64 = rng.gen();
        if u < self.epsilon {
            Ok(rng.gen_range(0..q.len()))
        } else {
            Ok(argmax(&q))
        }
    }

    pub fn duration_policy(&self, state: &[f64]) -> Result<DurationPolicy> {
        DurationPolicy::from_logits(&self.online.duration_logits(state)?)
    }

    pub fn sample_duration<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<usize> {
        Ok(self.duration_policy(state)?.sample(rng))
    }

    /// Maps a Q-head index to the environment action and duration.
    pub fn decode<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        q_index: usize,
        duration_rng: &mut R,
    ) -> Result<Decision> {
        let (action, duration) = match &self.rule {
            DurationRule::Bandit { .. } => (q_index, self.sample_duration(state, duration_rng)?),
            DurationRule::Static { arr } => (q_index, *arr),
            DurationRule::Discrete { options } => {
                let (action, option) = crate::baselines::split_pair(q_index, options.len());
                (action, options[option])
            }
        };
        Ok(Decision {
            q_index,
            action,
            duration,
        })
    }

    /// Epsilon-greedy Q-head choice followed by the family's duration rule.
    pub fn decide<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        state: &[f64],
        exploration_rng: &mut R1,
        duration_rng: &mut R2,
    ) -> Result<Decision> {
        let q_index = self.select_action(state, exploration_rng)?;
        self.decode(state, q_index, duration_rng)
    }

    /// `max_a Q(s_after, a) - Q(s_before, a_taken)` on the online network.
    pub fn bandit_reward(&self, s_before: &[f64], a_taken: usize, s_after: &[f64]) -> Result<f64> {
        let before = self.q_values(s_before)?;
        let after = self.q_values(s_after)?;
        let taken = *before.get(a_taken).ok_or_else(|| {
            Error::Usage(format!("action {a_taken} outside 0..{}", before.len()))
        })?;
        Ok(after[argmax(&after)] - taken)
    }

    /// Bandit reward for a collected outcome. A terminal outcome has no
    /// successor state to evaluate, so its post-duration value is the
    /// accumulated reward (the TD target with nothing to bootstrap from).
    pub fn outcome_bandit_reward(
        &self,
        s_before: &[f64],
        a_taken: usize,
        outcome: &SmdpOutcome,
    ) -> Result<f64> {
        if outcome.terminal {
            let before = self.q_values(s_before)?;
            Ok(outcome.accumulated_reward - before[a_taken])
        } else {
            self.bandit_reward(s_before, a_taken, &outcome.next_observation)
        }
    }

    /// Gradient of `-coef * log pi_b(d | state)` w.r.t. the duration head,
    /// and w.r.t. the trunk when the bandit is allowed to train it.
    ///
    /// Returns `None` when `log pi_b(d)` is below the clamp.
    pub fn bandit_loss_gradient(
        &self,
        state: &[f64],
        d_taken: usize,
        coef: f64,
    ) -> Result<Option<(GradientBundle, Option<GradientBundle>)>> {
        let d_max = match self.rule {
            DurationRule::Bandit { d_max } => d_max,
            _ => return Err(Error::Usage("bandit update on a non-bandit agent".into())),
        };
        if !(1..=d_max).contains(&d_taken) {
            return Err(Error::Usage(format!("duration {d_taken} outside 1..={d_max}")));
        }
        let (features, trunk_cache) = self.online.features(state)?;
        let (logits, head_cache) = forward(&self.online.duration_head, &features)?;
        let probs = softmax(&logits)?;
        if probs[d_taken - 1].ln() < LOG_PROB_FLOOR {
            return Ok(None);
        }
        // d/dz_j log softmax(z)_d = 1[j = d] - pi_j; negated for descent.
        let grad_logits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let indicator = if j + 1 == d_taken { 1.0 } else { 0.0 };
                -coef * (indicator - p)
            })
            .collect();
        let (head_grads, grad_features) = backward(&self.online.duration_head, &head_cache, &grad_logits)?;
        let trunk_grads = if self.config.bandit_trains_trunk && !self.online.trunk.is_empty() {
            Some(backward(&self.online.trunk, &trunk_cache, &grad_features)?.0)
        } else {
            None
        };
        Ok(Some((head_grads, trunk_grads)))
    }

    /// One ascent step on `r_b * log pi_b(d_taken | state)`.
    pub fn bandit_update(&mut self, state: &[f64], d_taken: usize, r_b: f64) -> Result<BanditStep> {
        if !r_b.is_finite() {
            self.counters.skipped_bandit_updates += 1;
            return Ok(BanditStep::Skipped);
        }
        let coef = if self.config.bandit_baseline_rate > 0.0 {
            let advantage = r_b - self.baseline;
            self.baseline += self.config.bandit_baseline_rate * (r_b - self.baseline);
            advantage
        } else {
            r_b
        };
        let Some((head_grads, trunk_grads)) = self.bandit_loss_gradient(state, d_taken, coef)? else {
            return Ok(BanditStep::Clamped);
        };
        if !head_grads.is_finite() || trunk_grads.as_ref().is_some_and(|g| !g.is_finite()) {
            self.counters.skipped_bandit_updates += 1;
            return Ok(BanditStep::Skipped);
        }
        let lr = self.config.learning_rate_bandit;
        sgd_step(&mut self.online.duration_head, &head_grads, lr)?;
        if let Some(g) = trunk_grads {
            sgd_step(&mut self.online.trunk, &g, lr)?;
        }
        self.counters.bandit_updates += 1;
        Ok(BanditStep::Applied)
    }

    /// SMDP target `r + gamma^frames * max_a Q_target(s', a)` (no bootstrap
    /// when terminal).
    pub fn td_target(&self, t: &Transition) -> Result<f64> {
        if t.terminal {
            return Ok(t.reward);
        }
        let next = self.target.q_values(&t.next_state)?;
        Ok(t.reward + self.config.gamma.powi(t.frames_elapsed as i32) * next[argmax(&next)])
    }

    /// Mean squared TD error over `batch` and its gradient w.r.t. the Q path
    /// `(trunk, q_head)`. Entries with non-finite targets are dropped.
    pub fn td_loss_gradient(
        &self,
        batch: &[&Transition],
    ) -> Result<(Option<f64>, usize, GradientBundle, GradientBundle)> {
        let mut kept = Vec::with_capacity(batch.len());
        let mut dropped = 0;
        for t in batch {
            if t.action >= self.online.q_width() {
                return Err(Error::Usage(format!("transition action {} outside q head", t.action)));
            }
            let y = self.td_target(t)?;
            if y.is_finite() {
                kept.push((*t, y));
            } else {
                dropped += 1;
            }
        }
        let mut trunk_grads = GradientBundle::zeros_like(&self.online.trunk);
        let mut head_grads = GradientBundle::zeros_like(&self.online.q_head);
        if kept.is_empty() {
            return Ok((None, dropped, trunk_grads, head_grads));
        }
        let n = kept.len() as f64;
        let mut loss = 0.0;
        let mut grad_out = vec![0.0; self.online.q_width()];
        for (t, y) in kept {
            let (features, trunk_cache) = self.online.features(&t.state)?;
            let (q, head_cache) = forward(&self.online.q_head, &features)?;
            let err = q[t.action] - y;
            loss += err * err;
            grad_out.fill(0.0);
            grad_out[t.action] = 2.0 * err / n;
            let grad_features =
                backward_accumulate(&self.online.q_head, &head_cache, &grad_out, &mut head_grads)?;
            if !self.online.trunk.is_empty() {
                backward_accumulate(&self.online.trunk, &trunk_cache, &grad_features, &mut trunk_grads)?;
            }
        }
        Ok((Some(loss / n), dropped, trunk_grads, head_grads))
    }

    /// One SGD step on the TD loss; returns the loss before the step.
    pub fn td_update(&mut self, batch: &[&Transition]) -> Result<TdStep> {
        if batch.is_empty() {
            return Err(Error::Usage("td_update needs a non-empty batch".into()));
        }
        let (loss, dropped, trunk_grads, head_grads) = self.td_loss_gradient(batch)?;
        self.counters.dropped_transitions += dropped as u64;
        if loss.is_none() {
            return Ok(TdStep {
                loss,
                dropped,
                applied: false,
            });
        }
        if !trunk_grads.is_finite() || !head_grads.is_finite() {
            self.counters.skipped_td_updates += 1;
            return Ok(TdStep {
                loss,
                dropped,
                applied: false,
            });
        }
        let lr = self.config.learning_rate_q;
        sgd_step(&mut self.online.q_head, &head_grads, lr)?;
        if !self.online.trunk.is_empty() {
            sgd_step(&mut self.online.trunk, &trunk_grads, lr)?;
        }
        self.counters.td_updates += 1;
        Ok(TdStep {
            loss,
            dropped,
            applied: true,
        })
    }

    /// `theta^- <- theta` for the Q path.
    pub fn sync_target(&mut self) {
        self.target = self.online.q_path();
        self.counters.target_syncs += 1;
    }

    /// Counts one environment decision and syncs the target network every
    /// `target_sync_interval` decisions. Returns whether a sync happened.
    pub fn record_decision(&mut self) -> bool {
        self.counters.decisions += 1;
        if self.counters.decisions % self.config.target_sync_interval == 0 {
            self.sync_target();
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests;
