use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ppeq::cli::{Cli, Command};
use ppeq::error::{exit, AppError};

fn init_logging(cli: &Cli) {
    let default = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    let level = std::env::var("PPEQ_LOG").unwrap_or_else(|_| default.to_string());
    let level = level.parse::<tracing::Level>().unwrap_or(tracing::Level::INFO);
    tracing_subscriber::fmt()
        .json()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = AppError::InvalidArgument(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(exit::USAGE as u8);
        }
    };
    init_logging(&cli);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match ppeq::cli::run(cli, &mut out).and_then(|()| out.flush().map_err(AppError::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
