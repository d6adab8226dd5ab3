//! Command-line front end: transcript parsing, snapshots and the `ew`
//! subcommands.

pub mod commands;
pub mod error;
pub mod snapshot;
pub mod transcript;

pub use commands::Overrides;
pub use error::CliError;
pub use snapshot::GraphSnapshot;
