mod cli;
mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::Cli;
use crate::commands::{Ctx, Outcome};
use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::Recorder;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Empty(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let (name, opts) = cli.command.split();
    let settings = Settings::resolve(name, opts.config.as_deref(), opts.overrides())?;
    let rec = Recorder::start(name, settings.values().clone());
    let mut ctx = Ctx {
        settings,
        rec,
        anchor: None,
    };
    let outcome = commands::run(name, &mut ctx)?;
    if let Some(anchor) = ctx.anchor {
        let path = ctx.rec.finish(&anchor)?;
        log::info!("manifest: {}", path.display());
    }
    Ok(outcome)
}
