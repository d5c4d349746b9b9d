use std::process::ExitCode;

use clap::Parser;
use dqm_cli::{run_cli, Cli};

fn main() -> ExitCode {
    ExitCode::from(run_cli(Cli::parse()))
}
