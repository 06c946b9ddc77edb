//! `fairsin`: command-line harness for fair node classification
//! experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or numeric error.

mod commands;
mod config;
mod output;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigError;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser, Debug)]
#[command(
    name = "fairsin",
    version,
    about = "Fair node classification by sensitive-information neutralization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a homophilous, sensitively biased graph.
    Synth(commands::synth::Args),
    /// Write a debiased copy of a dataset (edge reweighting or feature
    /// neutralization).
    Preprocess(commands::preprocess::Args),
    /// Train one variant over all seeds and report test metrics.
    Train(commands::train::Args),
    /// Measure how well the sensitive attribute can be recovered from raw
    /// and neutralized features.
    Probe(commands::probe::Args),
    /// Train over a grid of delta values.
    Sweep(commands::sweep::Args),
    /// Check manifests, file hashes and report schemas in an output
    /// directory.
    Verify(commands::verify::Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Preprocess(a) => commands::preprocess::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Probe(a) => commands::probe::run(a),
        Command::Sweep(a) => commands::sweep::run(a),
        Command::Verify(a) => commands::verify::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
