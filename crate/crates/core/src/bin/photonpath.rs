use std::process::ExitCode;

use clap::Parser;
use photonpath::cli::{RunConfig, run};

fn main() -> ExitCode {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match &config.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, report) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(5);
            }
        }
        None => print!("{report}"),
    }
    ExitCode::SUCCESS
}
