//! rlcm: identifiability checks, simulation and estimation for restricted
//! latent class models.
//!
//! Exit codes: 0 identifiable at some level (or command succeeded), 1 error,
//! 2 definitively not identifiable, 3 undetermined.

mod commands;

use clap::Parser;
use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = commands::Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose { "info" } else { "warn" }))
        .init();
    let mut out = String::new();
    let result = commands::run(cli, &mut out);
    // a closed pipe downstream is not an error
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
