use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use gridtree_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gridtree: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
