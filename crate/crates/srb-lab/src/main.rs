use std::process::ExitCode;

use clap::Parser;

use srb_lab::cli::{self, Cli};

fn main() -> ExitCode {
    if let Ok(val) = std::env::var("SRB_LAB_THREADS") {
        match val.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: SRB_LAB_THREADS must be a positive integer, got {val:?}");
                return ExitCode::from(2);
            }
        }
    }
    let parsed = Cli::parse();
    match cli::run(parsed) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code_for(&e))
        }
    }
}
