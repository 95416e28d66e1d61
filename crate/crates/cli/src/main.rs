use std::process::ExitCode;

fn main() -> ExitCode {
    let code = sdstab_cli::commands::execute(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
