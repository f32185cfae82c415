use clap::Parser;
use durpipe_cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DURPIPE_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(e) = durpipe_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
