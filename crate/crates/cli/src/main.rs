mod commands;
mod config;
mod error;
mod output;

use clap::Parser;
use env_logger::Env;

use config::{Cli, Command};
use error::Result;
use output::{emit, Status};

fn run(command: Command) -> Result<Status> {
    let name = command.name();
    let opts = command.options()?;
    let report = match name {
        "spectrum" => commands::spectrum::run(&opts)?,
        "periodic" => commands::periodic::run(&opts)?,
        "certify" => commands::certify::run(&opts)?,
        "measures" => commands::measures::run(&opts)?,
        _ => commands::suspend::run(&opts)?,
    };
    emit(&report, opts.format(), opts.output.as_deref())?;
    Ok(report.status)
}

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("FRAMEFLOW_LOG", "error")).init();
    let cli = Cli::parse();
    let name = cli.command.name();
    let code = match run(cli.command) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("frameflow {name}: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
