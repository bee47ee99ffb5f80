//! Thin binary wrapper over the library's CLI module.

use clap::Parser;

fn main() {
    env_logger::init();
    let cli = pielab::cli::Cli::parse();
    if let Err(err) = pielab::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
