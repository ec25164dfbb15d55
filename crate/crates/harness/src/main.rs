use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jaguar_harness::config::ExperimentConfig;
use jaguar_harness::runner::{run_experiment, thread_pool};
use jaguar_harness::{presets, report, suites, HarnessError, Result};

#[derive(Debug, Parser)]
#[command(name = "jaguar", version, about = "Zero-order optimizer experiments and theory checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (sweep point, seed) pair of an experiment.
    Run {
        /// Experiment config file.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Use a built-in experiment instead of a file.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run a property-check suite and print one line per check.
    Check {
        /// Suite name, `all` or `determinism`.
        suite: String,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Also write the outcomes as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a finished output directory into report.csv and report.txt.
    Report {
        dir: PathBuf,
    },
    /// List the built-in experiments.
    SweepPresets {
        /// Print the config of one preset.
        #[arg(long)]
        show: Option<String>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            preset,
            out,
            workers,
            seed_override,
        } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => ExperimentConfig::from_path(&path)?,
                (None, Some(name)) => presets::load(&name)?,
                (None, None) => unreachable!("clap requires one of --config / --preset"),
            };
            if let Some(seed) = seed_override {
                cfg.seeds = vec![seed];
            }
            if let Some(out) = out {
                cfg.output = Some(out);
            }
            let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
            let done = run_experiment(&cfg, &out, workers.max(1))?;
            let b = &done.budget;
            println!(
                "{} runs -> {} ({} oracle calls, budget {}, {} diagnostic evaluations)",
                b.runs,
                out.display(),
                b.optimizer_oracle_calls,
                b.two_point_budget,
                b.diagnostic_evaluations
            );
            for c in &done.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {:?} [{}]: {}", c.check, c.scope, c.detail);
            }
            Ok(done.checks.iter().all(|c| c.passed))
        }
        Command::Check {
            suite,
            workers,
            out,
        } => {
            let outcomes = thread_pool(workers.max(1))?.install(|| suites::run_named(&suite))?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&outcomes).expect("serializable outcomes");
                std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Command::Report { dir } => {
            let rows = report::write_report(&dir)?;
            print!("{}", report::render_table(&rows));
            Ok(true)
        }
        Command::SweepPresets { show } => {
            match show {
                Some(name) => print!("{}", presets::find(&name)?.toml),
                None => {
                    for p in presets::PRESETS {
                        println!("{:<14} {}", p.name, p.description);
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&e.to_json()).expect("json"));
            ExitCode::from(2)
        }
    }
}
