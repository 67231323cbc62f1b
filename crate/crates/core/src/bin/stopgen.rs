use std::process::ExitCode;

use stopgen::cli::{run_with_args, CliError};

fn main() -> ExitCode {
    match run_with_args(std::env::args_os(), &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => e.exit(),
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
