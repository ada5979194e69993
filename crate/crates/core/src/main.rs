use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    ExitCode::from(renewal_hawkes::cli::main_with_args(&args))
}
