use std::process::ExitCode;

use clap::Parser;
use mtl_mood::cli::{run, Cli, FATAL_EXIT};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli, &mut std::io::stdout()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(FATAL_EXIT)
        }
    }
}
