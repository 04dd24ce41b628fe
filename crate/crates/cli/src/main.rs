use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::init();
    pdd_cli::main_with_args(std::env::args().collect())
}
