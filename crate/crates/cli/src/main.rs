//! `metricdep` command-line front end.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::Cli;

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("METRICDEP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        anyhow::anyhow!("METRICDEP_THREADS must be a positive integer, got `{raw}`")
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| commands::run(cli));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
