//! `periwave solve|certify|sweep|evolve`: batch runs driven by JSON configs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Failure, Run, Stage, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "periwave", version, about = "Periodic traveling waves: construction, stability certification, evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the profile equation and write the wave files.
    Solve(Common),
    /// Check the spectral hypotheses and issue a stability verdict.
    Certify(WithWave),
    /// Continue a family of waves and certify every member.
    Sweep(WithWave),
    /// Evolve perturbed waves and track the orbital distance.
    Evolve(WithWave),
    /// Print the JSON schema of run configs.
    Schema,
}

#[derive(Args)]
struct Common {
    /// JSON run config; layered over the preset when both are given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in config to start from.
    #[arg(long)]
    preset: Option<String>,
    /// Dotted `key=value` replacement applied last; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: output.directory of the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WithWave {
    #[command(flatten)]
    common: Common,
    /// Previously written wave (sidecar JSON or profile CSV) used instead of solving.
    #[arg(long)]
    wave: Option<PathBuf>,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("PERIWAVE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::new(EXIT_CONFIG, format!("PERIWAVE_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().stage(EXIT_CONFIG, "thread pool")
}

fn prepare(common: &Common, wave: Option<&PathBuf>) -> Result<Run, Failure> {
    if common.config.is_none() && common.preset.is_none() && wave.is_none() {
        return Err(Failure::new(EXIT_CONFIG, "need --config, --preset or --wave"));
    }
    let cfg = config::load(common.preset.as_deref(), common.config.as_deref(), &common.overrides)
        .stage(EXIT_CONFIG, "config")?;
    Run::new(cfg, common.out.clone(), wave.map(|p| commands::wave_file_path(p)))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Solve(c) => commands::solve(&prepare(&c, None)?),
        Command::Certify(c) => commands::certify_cmd(&prepare(&c.common, c.wave.as_ref())?),
        Command::Sweep(c) => commands::sweep(&prepare(&c.common, c.wave.as_ref())?),
        Command::Evolve(c) => commands::evolve(&prepare(&c.common, c.wave.as_ref())?),
        Command::Schema => {
            print!("{}", config::SCHEMA);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
