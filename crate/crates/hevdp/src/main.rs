use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    hevdp::cli::run(hevdp::cli::Cli::parse()).into()
}
