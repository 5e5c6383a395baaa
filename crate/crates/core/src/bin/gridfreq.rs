use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = gridfreq::cli::run_from_args(std::env::args_os());
    if outcome.exit_code == gridfreq::cli::EXIT_OK {
        if !outcome.summary.is_empty() {
            println!("{}", outcome.summary);
        }
        for path in &outcome.artifacts_written {
            println!("wrote {}", path.display());
        }
    } else {
        eprintln!("error: {}", outcome.summary.trim_end());
    }
    ExitCode::from(outcome.exit_code as u8)
}
