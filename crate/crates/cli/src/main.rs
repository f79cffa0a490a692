use clap::Parser;

use eldp_cli::commands::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("eldp: {e}");
        std::process::exit(e.exit_code());
    }
}
