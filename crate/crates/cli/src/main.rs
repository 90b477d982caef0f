use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = catness_cli::Cli::parse();
    match catness_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(catness_cli::exit_code(&e))
        }
    }
}
