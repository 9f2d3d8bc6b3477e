//! Duration-share and family-comparison reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{read_summary, run_files, RunStatus, Summary};
use crate::error::{Error, Result};
use crate::metrics::{read_jsonl, MetricsRecord, Phase};

/// Short / medium / long partition of `1..=d_max`, as inclusive ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationBuckets {
    pub short: (usize, usize),
    pub medium: (usize, usize),
    pub long: (usize, usize),
}

impl DurationBuckets {
    /// Ranges must be nonempty, contiguous, start at 1 and end at `d_max`.
    pub fn from_ranges(ranges: &[[usize; 2]], d_max: usize) -> Result<Self> {
        if ranges.len() != 3 {
            return Err(Error::config(format!("expected 3 bucket ranges, got {}", ranges.len())));
        }
        let mut next = 1;
        for (i, &[lo, hi]) in ranges.iter().enumerate() {
            if lo != next || hi < lo {
                return Err(Error::config(format!(
                    "bucket {} = [{lo}, {hi}] must start at {next} and be nonempty",
                    i + 1
                )));
            }
            next = hi + 1;
        }
        if next != d_max + 1 {
            return Err(Error::config(format!(
                "buckets cover 1..={} but durations run 1..={d_max}",
                next - 1
            )));
        }
        Ok(Self {
            short: (ranges[0][0], ranges[0][1]),
            medium: (ranges[1][0], ranges[1][1]),
            long: (ranges[2][0], ranges[2][1]),
        })
    }

    /// Thirds of `1..=d_max`, rounding down the first two (10 gives 1-3, 4-6, 7-10).
    pub fn thirds(d_max: usize) -> Result<Self> {
        if d_max < 3 {
            return Err(Error::config(format!(
                "default buckets need a maximum duration of at least 3, got {d_max}"
            )));
        }
        let third = d_max / 3;
        Self::from_ranges(&[[1, third], [third + 1, 2 * third], [2 * third + 1, d_max]], d_max)
    }

    pub fn d_max(&self) -> usize {
        self.long.1
    }

    /// Percentages of decisions per bucket.
    pub fn shares(&self, histogram: &[u64]) -> Result<BucketShares> {
        if histogram.len() != self.d_max() {
            return Err(Error::Dimension {
                context: "duration histogram",
                expected: self.d_max(),
                actual: histogram.len(),
            });
        }
        let sum = |(lo, hi): (usize, usize)| histogram[lo - 1..hi].iter().sum::<u64>();
        let counts = [sum(self.short), sum(self.medium), sum(self.long)];
        let total: u64 = counts.iter().sum();
        let pct = |c: u64| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
        Ok(BucketShares {
            short: pct(counts[0]),
            medium: pct(counts[1]),
            long: pct(counts[2]),
            decisions: total,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketShares {
    pub short: f64,
    pub medium: f64,
    pub long: f64,
    pub decisions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunShares {
    pub seed: u64,
    pub shares: BucketShares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationReport {
    pub buckets: DurationBuckets,
    pub phase: Phase,
    pub runs: Vec<RunShares>,
    pub pooled: BucketShares,
}

/// Sums the duration histograms of `records` in `phase`.
pub fn pooled_histogram<'a>(
    records: impl IntoIterator<Item = &'a MetricsRecord>,
    phase: Phase,
    d_max: usize,
) -> Result<Vec<u64>> {
    let mut total = vec![0u64; d_max];
    for r in records.into_iter().filter(|r| r.phase == phase) {
        if r.duration_histogram.len() != d_max {
            return Err(Error::Dimension {
                context: "duration histogram",
                expected: d_max,
                actual: r.duration_histogram.len(),
            });
        }
        for (t, c) in total.iter_mut().zip(&r.duration_histogram) {
            *t += c;
        }
    }
    Ok(total)
}

/// Bucket shares per run and pooled over runs, from in-memory metrics.
pub fn duration_report(
    runs: &[(u64, Vec<MetricsRecord>)],
    buckets: DurationBuckets,
    phase: Phase,
) -> Result<DurationReport> {
    let mut pooled = vec![0u64; buckets.d_max()];
    let mut out = Vec::with_capacity(runs.len());
    for (seed, records) in runs {
        let hist = pooled_histogram(records, phase, buckets.d_max())?;
        for (p, c) in pooled.iter_mut().zip(&hist) {
            *p += c;
        }
        out.push(RunShares {
            seed: *seed,
            shares: buckets.shares(&hist)?,
        });
    }
    Ok(DurationReport {
        buckets,
        phase,
        runs: out,
        pooled: buckets.shares(&pooled)?,
    })
}

/// [`duration_report`] over the metrics files of a run directory. Buckets
/// default to thirds of the family's maximum duration.
pub fn duration_report_dir(
    run_dir: &Path,
    buckets: Option<DurationBuckets>,
    phase: Phase,
) -> Result<DurationReport> {
    let summary = read_summary(run_dir)?;
    let buckets = buckets.or(summary.buckets).ok_or_else(|| {
        Error::config("no duration buckets: the family's maximum duration is below 3")
    })?;
    let mut runs = Vec::new();
    for run in &summary.runs {
        if run.status != RunStatus::Ok {
            continue;
        }
        let records = read_jsonl(&run_files(run_dir, run.seed).metrics)?;
        runs.push((run.seed, records));
    }
    duration_report(&runs, buckets, phase)
}

impl DurationReport {
    pub fn render(&self) -> String {
        let b = &self.buckets;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>10} {:>10}",
            "seed",
            format!("short {}-{}", b.short.0, b.short.1),
            format!("med {}-{}", b.medium.0, b.medium.1),
            format!("long {}-{}", b.long.0, b.long.1),
            "decisions"
        );
        let mut row = |label: String, sh: &BucketShares| {
            let _ = writeln!(
                s,
                "{label:<8} {:>9.1}% {:>9.1}% {:>9.1}% {:>10}",
                sh.short, sh.medium, sh.long, sh.decisions
            );
        };
        for r in &self.runs {
            row(r.seed.to_string(), &r.shares);
        }
        row("pooled".into(), &self.pooled);
        s
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub label: String,
    pub run_dir: PathBuf,
    pub runs: usize,
    pub mean_final: f64,
    pub std_final: f64,
    pub mean_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDifference {
    pub a: String,
    pub b: String,
    /// `mean_final(a) - mean_final(b)`
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub differences: Vec<PairDifference>,
}

/// Mean +- std of final evaluation scores per family, rows in argument order.
pub fn compare_report(summaries: &[(PathBuf, Summary)]) -> Result<CompareReport> {
    if summaries.len() < 2 {
        return Err(Error::Usage("compare needs at least two run directories".into()));
    }
    let reference = &summaries[0].1.protocol;
    for (dir, s) in &summaries[1..] {
        if &s.protocol != reference {
            return Err(Error::Incompatible(format!(
                "{} was run under a different environment or evaluation protocol",
                dir.display()
            )));
        }
    }
    let rows: Vec<CompareRow> = summaries
        .iter()
        .map(|(dir, s)| {
            let finals: Vec<f64> = s.ok_runs().filter_map(|r| r.final_score).collect();
            let bests: Vec<f64> = s.ok_runs().filter_map(|r| r.best_score).collect();
            let (mean_final, std_final) = mean_std(&finals);
            CompareRow {
                label: s.family.clone(),
                run_dir: dir.clone(),
                runs: finals.len(),
                mean_final,
                std_final,
                mean_best: mean_std(&bests).0,
            }
        })
        .collect();
    let mut differences = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            differences.push(PairDifference {
                a: rows[i].label.clone(),
                b: rows[j].label.clone(),
                difference: rows[i].mean_final - rows[j].mean_final,
            });
        }
    }
    Ok(CompareReport { rows, differences })
}

pub fn compare_report_dirs(dirs: &[PathBuf]) -> Result<CompareReport> {
    let summaries = dirs
        .iter()
        .map(|d| Ok((d.clone(), read_summary(d)?)))
        .collect::<Result<Vec<_>>>()?;
    compare_report(&summaries)
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:>5} {:>20} {:>10}", "family", "runs", "final (mean +- std)", "best");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<24} {:>5} {:>11.4} +- {:<6.4} {:>10.4}",
                r.label, r.runs, r.mean_final, r.std_final, r.mean_best
            );
        }
        for d in &self.differences {
            let _ = writeln!(s, "{} - {} = {:+.4}", d.a, d.b, d.difference);
        }
        s
    }
}
