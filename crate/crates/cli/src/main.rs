use std::process::ExitCode;

fn main() -> ExitCode {
    let code = std::panic::catch_unwind(|| rpdhg_cli::dispatch(std::env::args_os())).unwrap_or_else(|_| {
        eprintln!("error: internal failure");
        rpdhg_cli::EXIT_NUMERIC
    });
    ExitCode::from(code as u8)
}
