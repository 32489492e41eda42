use std::io;
use std::process::ExitCode;

use clap::Parser;
use photon_mux_cli::{init_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(&cli.command, &mut io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("photon-mux: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
