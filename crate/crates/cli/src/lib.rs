//! Experiment harness behind the `fate` binary: config loading, the
//! `optimize`, `sweep`, `compare`, `baseline` and `metrics` commands, and
//! the CSV and JSON artifacts they write.

pub mod commands;
pub mod config;
pub mod records;

pub use config::{ConfigError, Experiment, ExperimentConfig, Overrides};

/// Runs `f` on a rayon pool of `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(ConfigError("--jobs must be at least 1".into()).into()),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
    }
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<ConfigError>().is_some()) {
        2
    } else {
        1
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
