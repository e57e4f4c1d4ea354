use clap::Parser;

use ipinn::cli::{configure_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = configure_threads(std::env::var("IPINN_THREADS").ok()).and_then(|()| run(cli));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
