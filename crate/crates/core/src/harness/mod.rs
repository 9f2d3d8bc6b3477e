//! Experiment orchestration: configs, seeded runs, evaluation, reports.

mod config;
mod report;
mod run;

pub use config::{
    load_config, AgentSection, ExperimentConfig, Family, ReportSection, TrainingSection, OUTPUT_DIR_ENV,
};
pub use report::{
    compare_report, compare_report_dirs, duration_report, duration_report_dir, mean_std, pooled_histogram,
    BucketShares, CompareReport, CompareRow, DurationBuckets, DurationReport, PairDifference, RunShares,
};
pub use run::{
    evaluate, evaluate_agent, read_summary, run_experiment, run_files, train_run, Evaluation, Protocol,
    RunFiles, RunOutput, RunStatus, RunSummary, Summary, SummaryHeader, SUMMARY_FILE, SUMMARY_FORMAT_VERSION,
};
