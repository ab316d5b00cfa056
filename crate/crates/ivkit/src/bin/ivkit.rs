use clap::Parser;
use ivkit::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("ivkit: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
