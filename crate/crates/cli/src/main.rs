use std::process::ExitCode;

use clap::Parser;
use uavsim_cli::{run, threads_from_env, Args, CliError, RunSpec};

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunSpec::resolve(&args).and_then(|spec| {
        if args.print_config {
            print!("{}", spec.render());
            return Ok(());
        }
        let threads = threads_from_env()?;
        run(&spec, threads, &mut std::io::stdout())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uavsim: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
