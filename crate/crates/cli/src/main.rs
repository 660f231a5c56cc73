use clap::Parser;

use blockade_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            if let Some(data) = outcome.stdout {
                print!("{data}");
            }
            if !outcome.summary.is_empty() {
                eprintln!("{}", outcome.summary);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
