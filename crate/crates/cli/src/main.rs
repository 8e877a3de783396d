//! `nbprune`: select a noise-robust subset of a labeled training set.

mod bench;
mod eval;
mod fail;
mod manifest;
mod prune;
mod synth;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fail::{CliResult, Failure};

#[derive(Parser)]
#[command(name = "nbprune", version, about = "Noise-robust data pruning")]
struct Cli {
    /// Worker threads (0 uses all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a subset and write indices, a report and a run manifest.
    Prune(Box<prune::PruneArgs>),
    /// Summarize a selection: per-class counts and noise ratio.
    Eval(eval::EvalArgs),
    /// Generate a synthetic noisy-label dataset.
    Synth(synth::SynthArgs),
    /// Run the randomized property suite and trend checks.
    Verify(verify::VerifyArgs),
    /// Time selectors on synthetic data of growing size.
    Bench(bench::BenchArgs),
}

/// Clap renders multi-line errors; keep the lines that say what went wrong.
fn flatten_clap_error(err: &clap::Error) -> String {
    let text = err.to_string();
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .map(|l| l.trim_start_matches("error: "))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run(cli: Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Failure::arg(format!("--threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Prune(args) => prune::run(*args),
        Command::Eval(args) => eval::run(args),
        Command::Synth(args) => synth::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Bench(args) => bench::run(args),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            // --help / --version
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprintln!("{}", Failure::arg(flatten_clap_error(&err)));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
