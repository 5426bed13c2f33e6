use std::process::ExitCode;

fn main() -> ExitCode {
    sparsecs::cli::main_with_args(std::env::args_os())
}
