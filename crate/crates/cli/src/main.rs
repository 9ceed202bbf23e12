use clap::Parser;
use fedcf_cli::{exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
