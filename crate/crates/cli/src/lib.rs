//! Experiment runner behind the `spectral-bench` command.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! usage, 3 unreadable or invalid dataset.

pub mod commands;
pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use compare::{compare, Comparison};
pub use config::{ExperimentConfig, Mode, Overrides, Preprocessing};
pub use error::{exit, CliError, CliResult};
pub use experiment::run_experiment;
pub use report::{ExperimentReport, SCHEMA_VERSION};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SPECTRAL_BENCH_THREADS";

/// Size the global rayon pool from [`THREADS_ENV`] when it is set.
pub fn init_thread_pool() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Other(e.to_string()))
}
