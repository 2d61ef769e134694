use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tilegraft::cli::run(std::env::args_os()))
}
