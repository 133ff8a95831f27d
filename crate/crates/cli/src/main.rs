use clap::Parser;
use env_logger::Env;

use biostab_cli::args::Cli;
use biostab_cli::commands::run;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("BIOSTAB_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("biostab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
