use std::process::ExitCode;

use clap::Parser;

use mtd_cli::commands::{run, Cli};
use mtd_cli::EXIT_USAGE;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mtd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
