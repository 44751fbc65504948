use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use l1loc::{generate_rss, Scenario, Target};
use l1loc_harness::output::{csv, trace};
use l1loc_harness::scenario::shadowing_seed;
use l1loc_harness::trials::TrialResult;
use l1loc_harness::{generate_scenario, run_trial, run_trials, RunConfig};

#[derive(Parser)]
#[command(name = "l1loc", version, about = "Multi-emitter RSS localization with joint path-loss estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo trials of a config and write the CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides the trial count of the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Fill the time_ms column (makes the output run dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Localize a single scenario and write the estimate as JSON.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Write a scenario and its RSS readings as JSON.
    Gen {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file, stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace as line-delimited JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::load(&self.config).map_err(|e| Failure::Config(e.to_string()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RunOutput<'a> {
    result: &'a TrialResult,
    n_targets: usize,
    alpha: f64,
    beta: f64,
    targets: &'a [Target<f64>],
    truth: &'a [Target<f64>],
}

#[derive(Serialize)]
struct GenOutput<'a> {
    seed: u64,
    scenario: &'a Scenario<f64>,
    rss: &'a [f64],
}

fn json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::Simulate { common, trials, timing } => {
            let mut cfg = common.load()?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
            let outcomes = run_trials(&cfg);
            let rows: Vec<TrialResult> = outcomes.iter().map(|o| o.result.clone()).collect();
            write(common.out.as_deref(), &csv(&rows, timing))?;
            if let Some(p) = &common.trace {
                write(Some(p), &trace(&outcomes))?;
            }
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} trials failed", rows.len());
            }
            Ok(())
        }
        Command::Run { common } => {
            let cfg = common.load()?;
            let outcome = run_trial(&cfg, cfg.seed);
            let (Some(report), Some(sc)) = (&outcome.report, &outcome.scenario) else {
                return Err(Failure::Runtime(outcome.result.status));
            };
            if let Some(p) = &common.trace {
                write(Some(p), &trace(std::slice::from_ref(&outcome)))?;
            }
            let out = RunOutput {
                result: &outcome.result,
                n_targets: report.model.n_targets,
                alpha: report.model.alpha,
                beta: report.model.beta,
                targets: &report.targets,
                truth: &sc.targets,
            };
            write(common.out.as_deref(), &json(&out))
        }
        Command::Gen { common } => {
            let cfg = common.load()?;
            if common.trace.is_some() {
                return Err(Failure::Config("gen does not produce a trace".into()));
            }
            let sc = generate_scenario(&cfg, cfg.seed).map_err(|e| Failure::Runtime(e.to_string()))?;
            let rss = generate_rss(&sc, shadowing_seed(cfg.seed)).map_err(|e| Failure::Runtime(e.to_string()))?;
            write(common.out.as_deref(), &json(&GenOutput { seed: cfg.seed, scenario: &sc, rss: rss.as_slice() }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
