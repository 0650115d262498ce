use std::process::ExitCode;

fn main() -> ExitCode {
    blocksim::cli::main()
}
