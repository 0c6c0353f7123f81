use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(iontrap_duffing::cli::run(std::env::args_os()))
}
