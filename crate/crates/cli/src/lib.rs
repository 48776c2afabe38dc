//! Configuration, file formats and subcommands behind the `ncgossip` binary.

pub mod config;
pub mod formats;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use run::{run, Command, Report, RunError};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "NCGOSSIP_THREADS";
