use std::process::ExitCode;

fn main() -> ExitCode {
    let code = planverify_cli::main_with(
        std::env::args(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code)
}
