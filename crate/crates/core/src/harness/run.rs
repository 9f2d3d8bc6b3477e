//! Multi-seed training runs, evaluation and the on-disk artifact set.
//!
//! A run directory holds, per seed:
//! - `run_<seed>.metrics.jsonl`: train and eval [`MetricsRecord`]s
//! - `run_<seed>.scores.csv`: `phase,round,episode,score`
//! - `run_<seed>.checkpoint.json`: final agent and stream positions
//!
//! plus one `summary.json`. Only the summary header carries a timestamp.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{mean_std, DurationBuckets};
use crate::agent::{argmax, Agent, Checkpoint, Trainer};
use crate::envs::{execute_duration, EnvParams, Environment};
use crate::error::{Error, Result};
use crate::metrics::{write_jsonl, write_scores_csv, MetricsRecord, Phase, METRICS_FORMAT_VERSION};
use crate::rng::{stream, StreamName};

pub const SUMMARY_FORMAT_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";

pub struct RunFiles {
    pub metrics: PathBuf,
    pub scores: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn run_files(dir: &Path, seed: u64) -> RunFiles {
    RunFiles {
        metrics: dir.join(format!("run_{seed}.metrics.jsonl")),
        scores: dir.join(format!("run_{seed}.scores.csv")),
        checkpoint: dir.join(format!("run_{seed}.checkpoint.json")),
    }
}

/// Settings that must match for two run directories to be comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    pub env: EnvParams,
    pub decisions: u64,
    pub eval_interval: u64,
    pub eval_episodes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub train_episodes: u64,
    /// Mean evaluation score per round.
    pub eval_scores: Vec<f64>,
    pub final_score: Option<f64>,
    pub best_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryHeader {
    pub format_version: u32,
    /// Seconds since the Unix epoch when the summary was written.
    pub created_unix_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub header: SummaryHeader,
    pub family: String,
    pub config: ExperimentConfig,
    pub protocol: Protocol,
    /// Absent when the family's maximum duration is below 3 and no
    /// buckets were configured.
    pub buckets: Option<DurationBuckets>,
    pub runs: Vec<RunSummary>,
    /// Mean of per-run final evaluation scores over successful runs.
    pub mean_final_score: Option<f64>,
    pub std_final_score: Option<f64>,
    pub mean_best_score: Option<f64>,
    pub failed_runs: usize,
}

impl Summary {
    pub fn ok_runs(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter(|r| r.status == RunStatus::Ok)
    }
}

pub fn read_summary(run_dir: &Path) -> Result<Summary> {
    let path = run_dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let summary: Summary = serde_json::from_str(&text)?;
    if summary.header.format_version != SUMMARY_FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "{}: summary format_version {}",
            path.display(),
            summary.header.format_version
        )));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mean_score: f64,
    pub records: Vec<MetricsRecord>,
}

/// Greedy (epsilon = 0) episodes with durations from the agent's rule.
///
/// Episode seeds come from the `eval_env` stream of `seed` and duration
/// draws from `eval_duration`, both restarted on every call, so repeated
/// evaluations see the same episodes.
pub fn evaluate_agent(
    agent: &Agent,
    env: &EnvParams,
    episodes: u32,
    seed: u64,
    round: Option<u32>,
) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one episode".into()));
    }
    let mut environment = env.build()?;
    let spec = environment.spec();
    if spec.observation_width != agent.observation_width() || spec.action_count != agent.action_count() {
        return Err(Error::Dimension {
            context: "checkpoint vs environment observation width",
            expected: agent.observation_width(),
            actual: spec.observation_width,
        });
    }
    let mut env_rng = stream(seed, StreamName::EvalEnv);
    let mut duration_rng = stream(seed, StreamName::EvalDuration);
    let gamma = agent.config().gamma;
    let d_max = agent.rule().max_duration();
    let mut records = Vec::with_capacity(episodes as usize);
    for episode in 0..episodes {
        let mut state = environment.reset(env_rng.gen()).observation;
        let (mut score, mut frames, mut decisions) = (0.0, 0u64, 0u64);
        let mut histogram = vec![0u64; d_max];
        loop {
            let q = agent.q_values(&state)?;
            let decision = agent.decode(&state, argmax(&q), &mut duration_rng)?;
            let outcome = execute_duration(&mut environment, decision.action, decision.duration, gamma)?;
            score += outcome.undiscounted_reward;
            frames += outcome.frames_elapsed as u64;
            decisions += 1;
            histogram[decision.duration - 1] += 1;
            if outcome.terminal {
                break;
            }
            state = outcome.next_observation;
        }
        records.push(MetricsRecord {
            format_version: METRICS_FORMAT_VERSION,
            phase: Phase::Eval,
            run_seed: seed,
            round,
            episode: episode as u64,
            score,
            frames,
            decisions,
            mean_td_loss: None,
            duration_histogram: histogram,
            epsilon: 0.0,
            skipped_updates: 0,
            dropped_transitions: 0,
        });
    }
    let mean_score = records.iter().map(|r| r.score).sum::<f64>() / episodes as f64;
    Ok(Evaluation { mean_score, records })
}

/// Evaluates a saved agent; the checkpoint is only read.
pub fn evaluate(checkpoint: &Checkpoint, env: &EnvParams, episodes: u32, seed: u64) -> Result<f64> {
    let agent = checkpoint.agent()?;
    Ok(evaluate_agent(&agent, env, episodes, seed, None)?.mean_score)
}

/// Result of one seed, kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<MetricsRecord>,
    pub checkpoint: Checkpoint,
}

/// Trains and periodically evaluates one seed without touching the disk.
pub fn train_run(config: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let t = &config.training;
    let env = config.env.build()?;
    let mut trainer = Trainer::new(config.rule(), config.agent.shared(), t.schedule(), env, seed)?;
    let period = if t.eval_interval == 0 { t.decisions } else { t.eval_interval };
    let mut records = Vec::new();
    let mut eval_scores = Vec::new();
    let mut done = 0;
    while done < t.decisions {
        let n = period.min(t.decisions - done);
        records.extend(trainer.advance(n)?);
        done += n;
        let round = eval_scores.len() as u32;
        let eval = evaluate_agent(trainer.agent(), &config.env, t.eval_episodes, seed, Some(round))?;
        eval_scores.push(eval.mean_score);
        records.extend(eval.records);
    }
    let checkpoint = Checkpoint::capture(trainer.agent(), config.env, seed, Some(trainer.streams()));
    let summary = RunSummary {
        seed,
        status: RunStatus::Ok,
        error: None,
        train_episodes: trainer.episodes_done(),
        final_score: eval_scores.last().copied(),
        best_score: eval_scores.iter().copied().reduce(f64::max),
        eval_scores,
    };
    Ok(RunOutput {
        summary,
        records,
        checkpoint,
    })
}

fn write_run(dir: &Path, output: &RunOutput) -> Result<()> {
    let files = run_files(dir, output.summary.seed);
    write_jsonl(&files.metrics, &output.records)?;
    write_scores_csv(&files.scores, &output.records)?;
    output.checkpoint.save(&files.checkpoint)
}

fn failed(seed: u64, err: &Error) -> RunSummary {
    RunSummary {
        seed,
        status: RunStatus::Failed,
        error: Some(format!("{}: {err}", err.kind())),
        train_episodes: 0,
        eval_scores: Vec::new(),
        final_score: None,
        best_score: None,
    }
}

/// Trains every seed (in parallel), writes per-run files and the summary.
/// A failing seed is recorded in the summary; the others still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let runs: Vec<RunSummary> = config
        .seeds
        .par_iter()
        .map(|&seed| match train_run(config, seed).and_then(|out| write_run(dir, &out).map(|_| out)) {
            Ok(out) => out.summary,
            Err(e) => failed(seed, &e),
        })
        .collect();
    let summary = summarize(config, runs);
    let path = dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

fn summarize(config: &ExperimentConfig, runs: Vec<RunSummary>) -> Summary {
    let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_score).collect();
    let bests: Vec<f64> = runs.iter().filter_map(|r| r.best_score).collect();
    let (mean, std) = mean_std(&finals);
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Summary {
        header: SummaryHeader {
            format_version: SUMMARY_FORMAT_VERSION,
            created_unix_secs: created,
        },
        family: config.rule().label(),
        config: config.clone(),
        protocol: Protocol {
            env: config.env,
            decisions: config.training.decisions,
            eval_interval: config.training.eval_interval,
            eval_episodes: config.training.eval_episodes,
        },
        buckets: config.buckets().ok(),
        failed_runs: runs.iter().filter(|r| r.status == RunStatus::Failed).count(),
        mean_final_score: (!finals.is_empty()).then_some(mean),
        std_final_score: (!finals.is_empty()).then_some(std),
        mean_best_score: (!bests.is_empty()).then(|| mean_std(&bests).0),
        runs,
    }
}
