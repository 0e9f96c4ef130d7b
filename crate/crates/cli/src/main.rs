use std::process::ExitCode;

use clap::Parser;
use orbitsim_cli::args::Cli;
use orbitsim_cli::commands;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(value) = std::env::var("ORBITSIM_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is built once");
            }
            _ => {
                eprintln!("error: ORBITSIM_THREADS must be a positive integer, got {value:?}");
                return ExitCode::from(2);
            }
        }
    }
    let output = match commands::run(&cli) {
        Ok(output) => output,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.common.out {
        Some(path) => std::fs::write(path, &output.text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            use std::io::Write;
            match std::io::stdout().write_all(output.text.as_bytes()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other.map_err(|e| e.to_string()),
            }
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if output.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
