use std::process::ExitCode;

fn main() -> ExitCode {
    cribmac::cli::run_main()
}
