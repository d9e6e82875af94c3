use clap::Parser;

use wheeldyn::cli::{run, Cli};
use wheeldyn::exit_code;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Err(e) = run(cli, argv) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
