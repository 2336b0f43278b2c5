mod args;
mod commands;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use settings::FileConfig;

/// A bad invocation rather than a failed computation; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

fn execute(cli: &Cli) -> anyhow::Result<()> {
    if let Some(path) = &cli.config {
        if !path.is_file() {
            return Err(Usage(format!("no such config file: {}", path.display())).into());
        }
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Usage("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        file,
    };
    match &cli.command {
        Command::Run(a) => commands::run(a, &ctx),
        Command::Train(a) => commands::train(a, &ctx),
        Command::Judge(a) => commands::judge(a, &ctx),
        Command::Agree(a) => commands::agree(a),
        Command::Fitscale(a) => commands::fitscale(a),
        Command::FilterTasks(a) => commands::filter(a, &ctx),
        Command::MemoryBuild(a) => commands::memory_build(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
