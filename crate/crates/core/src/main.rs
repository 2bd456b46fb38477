use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(marl_dyn::cli_io::cli_main(std::env::args()) as u8)
}
