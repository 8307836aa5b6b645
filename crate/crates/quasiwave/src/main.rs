use clap::Parser;
use quasiwave::cli::{run, Cli};
use quasiwave::error::QwError;

fn main() {
    let cli = Cli::parse();
    let status = match run(&cli.command) {
        Ok(code) => code,
        Err(e @ (QwError::Config(_) | QwError::Json(_))) => {
            eprintln!("config error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(status);
}
