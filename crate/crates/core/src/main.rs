use std::process::ExitCode;

fn main() -> ExitCode {
    steklov_lab::cli::cli_main(std::env::args_os())
}
