//! `skm`: simulate, infer, learn, evaluate and benchmark from the shell.
//!
//! Exit codes: 0 success, 1 usage, 2 data or model validation, 3 internal.

mod bench;
mod dataset;
mod eval;
mod infer;
mod learn;
mod manifest;
mod simulate;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skm_core::SkmError;

#[derive(Parser, Debug)]
#[command(
    name = "skm",
    version,
    about = "Inference for stochastic kinetic models on contact networks"
)]
struct Cli {
    /// Worker threads for inference; 0 uses every core. SKM_THREADS overrides.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic SIS dataset.
    Simulate(simulate::Args),
    /// Mask observations and compute posterior infection probabilities.
    Infer(infer::Args),
    /// Learn the epidemic rate constants.
    Learn(learn::Args),
    /// ROC curve and infection counts from scores.
    Eval(eval::Args),
    /// Time inference across population sizes.
    Bench(bench::Args),
}

/// A flag combination that parses but makes no sense.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        1
    } else if err.chain().any(|e| e.is::<SkmError>()) {
        2
    } else {
        3
    }
}

fn thread_count(flag: usize) -> anyhow::Result<usize> {
    match std::env::var("SKM_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("SKM_THREADS={v} is not a thread count")).into()),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cli.threads)?)
        .build_global()?;
    match cli.command {
        Command::Simulate(a) => simulate::run(&a),
        Command::Infer(a) => infer::run(&a),
        Command::Learn(a) => learn::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Bench(a) => bench::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
