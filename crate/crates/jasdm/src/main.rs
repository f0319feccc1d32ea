use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(jasdm::cli::main())
}
