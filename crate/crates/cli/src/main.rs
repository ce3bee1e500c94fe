use std::process::ExitCode;

use clap::Parser;
use rotorlab_cli::args::{Cli, WORKERS_ENV};
use rotorlab_cli::commands::run;
use rotorlab_cli::error::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let (command, common) = cli.command.split();
    let workers = std::env::var(WORKERS_ENV).ok();
    let params = common.params(workers.as_deref())?;
    let summary = run(&command, &params, &common.out)?;
    for line in &summary.lines {
        println!("{line}");
    }
    println!("manifest: {}", summary.manifest.display());
    Ok(())
}
