use std::process::ExitCode;

use clap::Parser;
use trap_forge_cli::{error_document, run, worker_count, Cli, THREADS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    let outcome = worker_count(cli.workers, std::env::var(THREADS_ENV).ok().as_deref()).and_then(|n| {
        log::debug!("using {n} worker threads");
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| trap_forge::Error::Solver(format!("thread pool: {e}")))?;
        pool.install(|| run(&cli))
    });
    match outcome {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_document(&e));
            ExitCode::FAILURE
        }
    }
}
