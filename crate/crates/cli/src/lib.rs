//! Command line front-end: configuration, orchestration and reports.

pub mod config;
pub mod error;
pub mod run;

pub use config::{DataSpec, OutputFormat, OutputSpec, RunConfig};
pub use error::{CliError, CliResult};
pub use run::{run, Command, Overrides, RunOutcome, SCHEMA_VERSION};

/// Caps the global worker pool at `ACMAX_THREADS` when set.
pub fn init_threads(value: Option<&str>) -> CliResult<()> {
    let Some(v) = value else { return Ok(()) };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::ConfigParse(format!("ACMAX_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::ConfigParse(format!("cannot configure the worker pool: {e}")))
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
