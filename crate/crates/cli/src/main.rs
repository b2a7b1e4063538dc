use std::process::ExitCode;

use clap::Parser;
use diffwalker_cli::args::THREADS_ENV;
use diffwalker_cli::{execute, Cli, CliError};

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(value) => value
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}"))),
        Err(_) => Ok(flag),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => return e.report(),
    };
    if let Some(n) = threads {
        if n == 0 {
            return CliError::Usage("thread count must be at least 1".into()).report();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return CliError::Usage(format!("cannot start {n} worker threads: {e}")).report();
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
