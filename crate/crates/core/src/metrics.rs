//! Per-episode metrics rows and their on-disk forms.
//!
//! Each run writes one JSONL file (one [`MetricsRecord`] per line) and a CSV
//! projection `phase,round,episode,score`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

/// One episode.
///
/// | field | meaning |
/// |---|---|
/// | `format_version` | schema version, currently 1 |
/// | `phase` | `train` or `eval` |
/// | `run_seed` | master seed of the run |
/// | `round` | evaluation round (0-based); absent for training rows |
/// | `episode` | episode index within the phase (within the round for eval) |
/// | `score` | undiscounted sum of per-frame rewards |
/// | `frames` | environment frames in the episode |
/// | `decisions` | agent decisions in the episode |
/// | `mean_td_loss` | mean pre-step TD loss over the episode's updates, `null` if none |
/// | `duration_histogram` | decision counts for durations 1..=max duration |
/// | `epsilon` | exploration rate at episode end |
/// | `skipped_updates` | TD or bandit updates rejected for non-finite gradients |
/// | `dropped_transitions` | minibatch entries dropped for non-finite targets |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub format_version: u32,
    pub phase: Phase,
    pub run_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    pub episode: u64,
    pub score: f64,
    pub frames: u64,
    pub decisions: u64,
    pub mean_td_loss: Option<f64>,
    pub duration_histogram: Vec<u64>,
    pub epsilon: f64,
    pub skipped_updates: u64,
    pub dropped_transitions: u64,
}

impl MetricsRecord {
    pub fn histogram_total(&self) -> u64 {
        self.duration_histogram.iter().sum()
    }
}

pub fn write_jsonl(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetricsRecord = serde_json::from_str(&line)?;
        if record.format_version != METRICS_FORMAT_VERSION {
            return Err(Error::Incompatible(format!(
                "{}: metrics format_version {}",
                path.display(),
                record.format_version
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_scores_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut out = Vec::new();
    let io = |e| Error::io(path, e);
    writeln!(out, "phase,round,episode,score").map_err(io)?;
    for r in records {
        let phase = match r.phase {
            Phase::Train => "train",
            Phase::Eval => "eval",
        };
        let round = r.round.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{phase},{round},{},{}", r.episode, r.score).map_err(io)?;
    }
    fs::write(path, out).map_err(io)
}
