//! `tempalign`: synthetic alignment experiments, restoration and evaluation.

mod commands;
mod config;
mod errors;

use std::ffi::OsString;
use std::process::ExitCode;

use anyhow::Context;
use clap::{CommandFactory, Parser, Subcommand};

use crate::errors::{exit_code, InputError};

#[derive(Parser, Debug)]
#[command(name = "tempalign", version, about = "Iterative multi-frame alignment and adaptive re-weighting fusion")]
struct Cli {
    /// Flat `key = value` file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic sequence with ground-truth motion fields.
    #[command(args_override_self = true)]
    Synth(commands::synth::SynthArgs),
    /// Align and fuse a frame window onto its center frame.
    #[command(args_override_self = true)]
    Restore(commands::restore::RestoreArgs),
    /// Motion-magnitude benchmark over schedules and fusion modes.
    #[command(args_override_self = true)]
    Bench(commands::bench::BenchArgs),
    /// PSNR/SSIM between two images and endpoint error between two fields.
    #[command(args_override_self = true)]
    Eval(commands::eval::EvalArgs),
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("TA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| InputError::msg(format!("TA_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("building the worker pool")
}

fn run(args: Vec<OsString>) -> anyhow::Result<()> {
    let args = config::expand(args, &Cli::command())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            e.print()?;
            return Ok(());
        }
        Err(e) => {
            let _ = e.print();
            return Err(InputError::msg("invalid command line").into());
        }
    };
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth::run(&a),
        Command::Restore(a) => commands::restore::run(&a),
        Command::Bench(a) => commands::bench::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
