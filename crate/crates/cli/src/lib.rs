//! Configuration and subcommand implementations behind the `sqfree` binary.

pub mod config;
pub mod run;

pub use config::RunConfig;
pub use run::{run, EXIT_ERROR, EXIT_OK, EXIT_PARTIAL};
