use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use bandit_dqn::agent::Checkpoint;
use bandit_dqn::harness::{compare_report_dirs, duration_report_dir, evaluate, load_config, run_experiment};
use bandit_dqn::metrics::Phase;
use bandit_dqn::{Error, Result};

#[derive(Parser)]
#[command(name = "bandit-dqn", version, about = "Train and evaluate DQN agents with learned action durations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config and write metrics, checkpoints and a summary.
    Train { config: PathBuf },
    /// Greedy evaluation of a checkpoint in the config's environment.
    Eval {
        checkpoint: PathBuf,
        config: PathBuf,
        /// Defaults to the config's eval_episodes.
        #[arg(long)]
        episodes: Option<u32>,
        /// Defaults to the checkpoint's run seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    #[command(subcommand)]
    Report(Report),
}

#[derive(Subcommand)]
enum Report {
    /// Short / medium / long duration shares per run and pooled.
    Durations {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = PhaseArg::Eval)]
        phase: PhaseArg,
        #[arg(long)]
        json: bool,
    },
    /// Final-score table across families.
    Compare {
        #[arg(required = true, num_args = 2..)]
        run_dirs: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Train,
    Eval,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config } => {
            let mut config = load_config(&config)?;
            config.apply_env_override();
            let summary = run_experiment(&config)?;
            println!(
                "{}",
                json!({
                    "output_dir": config.output_dir,
                    "family": summary.family,
                    "mean_final_score": summary.mean_final_score,
                    "std_final_score": summary.std_final_score,
                    "failed_runs": summary.failed_runs,
                })
            );
            if summary.failed_runs > 0 {
                return Err(Error::Internal(format!("{} run(s) failed; see summary.json", summary.failed_runs)));
            }
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
            seed,
        } => {
            let config = load_config(&config)?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let episodes = episodes.unwrap_or(config.training.eval_episodes);
            let seed = seed.unwrap_or(ckpt.run_seed);
            let mean = evaluate(&ckpt, &config.env, episodes, seed)?;
            println!("{}", json!({ "mean_score": mean, "episodes": episodes, "seed": seed }));
        }
        Command::Report(Report::Durations { run_dir, phase, json }) => {
            let phase = match phase {
                PhaseArg::Train => Phase::Train,
                PhaseArg::Eval => Phase::Eval,
            };
            let report = duration_report_dir(&run_dir, None, phase)?;
            if json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
        Command::Report(Report::Compare { run_dirs, json }) => {
            let report = compare_report_dirs(&run_dirs)?;
            if json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let line = json!({ "error": { "kind": "usage", "message": e.kind().to_string() } });
            eprintln!("{line}");
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}
