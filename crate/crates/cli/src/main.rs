use std::process::ExitCode;

use clap::Parser;
use hydrotier_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                log::debug!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            // nested errors already include their sources in the message
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
