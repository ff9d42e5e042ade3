use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use colltest_cli::commands::{run, Cli};
use colltest_cli::EXIT_ERROR;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
