//! Command-line front end: weight generation, decoding to WAV, streaming
//! latency benchmarks and precision sweeps.

pub mod cli;
pub mod commands;
pub mod error;
pub mod pin;
pub mod report;
pub mod wav;

pub use cli::{Cli, Command};
pub use commands::run;
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE};
