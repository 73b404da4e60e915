use clap::Parser;
use mpemba_cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(&cli) {
        Ok(manifest) => log::info!("manifest: {}", manifest.display()),
        Err(e) => {
            log::error!("{e}");
            std::process::exit(exit_code(&e));
        }
    }
}
