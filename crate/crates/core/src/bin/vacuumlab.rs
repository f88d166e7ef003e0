use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use vacuumlab::runner::{
    commutator_only, parse_config, read_summary, run_scenario_with, verify_hypotheses, Bundle, ConfigError, RunError,
    RunOptions, Scenario, Summary,
};

/// Batch verification of continuity/transport scenarios.
#[derive(Parser)]
#[command(name = "vacuumlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory for bundles.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized checks; deterministic runs ignore it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write every snapshot into the bundle.
    #[arg(long, global = true)]
    dump_fields: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis of one or more scenarios.
    Run { configs: Vec<PathBuf> },
    /// Evaluate the exponent hypotheses of every theorem.
    VerifyHypotheses { config: PathBuf },
    /// Run only the commutator sweeps.
    CommutatorSweep { config: PathBuf },
    /// Solver-vs-oracle refinement study.
    Converge {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Print the summary of an existing bundle.
    Report { bundle: PathBuf },
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ABORTED: u8 = 3;
const EXIT_OTHER: u8 = 4;

fn load(path: &Path) -> Result<Scenario, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at(path.display().to_string(), e.to_string()))?;
    parse_config(&text).map_err(|e| ConfigError::at(format!("{}:{}", path.display(), e.location), e.message).into())
}

fn exit_for(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Aborted { .. } => EXIT_ABORTED,
        RunError::Analysis(_) | RunError::Io(_) => EXIT_OTHER,
    }
}

fn finish(bundle: &Bundle, dir: &Path) -> Result<u8, RunError> {
    bundle.write(dir)?;
    let summary = bundle.summary.as_ref().expect("runs always attach a summary");
    print!("{}", summary.render());
    println!("bundle: {}", dir.display());
    Ok(if summary.passed() { 0 } else { EXIT_FAILED })
}

fn run_one(path: &Path, common: &Common) -> Result<u8, RunError> {
    let s = load(path)?;
    let dir = common.out.join(&s.name);
    match run_scenario_with(&s, &RunOptions { dump_fields: common.dump_fields }) {
        Ok(b) => finish(&b, &dir),
        Err(RunError::Aborted { message, partial }) => {
            partial.write(&dir)?;
            Err(RunError::Aborted { message, partial })
        }
        Err(e) => Err(e),
    }
}

fn dispatch(cli: &Cli) -> Result<u8, RunError> {
    let common = &cli.common;
    match &cli.command {
        Command::Run { configs } => {
            if configs.is_empty() {
                return Err(ConfigError::at("run", "no config given").into());
            }
            // Scenarios run concurrently; reports are printed in argument order.
            let results: Vec<Result<u8, RunError>> = configs.par_iter().map(|p| run_one(p, common)).collect();
            let mut code = 0;
            for (p, r) in configs.iter().zip(results) {
                match r {
                    Ok(c) => code = code.max(c),
                    Err(e) => {
                        eprintln!("{}: {e}", p.display());
                        code = code.max(exit_for(&e));
                    }
                }
            }
            Ok(code)
        }
        Command::VerifyHypotheses { config } => {
            let s = load(config)?;
            let rep = verify_hypotheses(&s)?;
            println!("{}", serde_json::to_string_pretty(&rep).expect("serializes"));
            Ok(if rep.passed() { 0 } else { EXIT_FAILED })
        }
        Command::CommutatorSweep { config } => {
            let s = load(config)?;
            finish(&commutator_only(&s)?, &common.out.join(format!("{}-commutator", s.name)))
        }
        Command::Converge { config, levels } => {
            let mut s = load(config)?;
            s.analysis = vec![vacuumlab::runner::Analysis::Convergence { levels: *levels }];
            finish(&run_scenario_with(&s, &RunOptions::default())?, &common.out.join(format!("{}-converge", s.name)))
        }
        Command::Report { bundle } => {
            let summary: Summary = read_summary(bundle)?;
            print!("{}", summary.render());
            Ok(if summary.passed() { 0 } else { EXIT_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool") {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_OTHER);
        }
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
