use std::process::ExitCode;

use clap::Parser;

use blocksim_cli::args::Cli;
use blocksim_cli::commands::run;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
