use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bdvp::cli::run(std::env::args_os()))
}
