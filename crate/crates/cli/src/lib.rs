//! Command-line front end: file formats, manifests and subcommand handlers.

pub mod commands;
pub mod csv_io;
pub mod manifest;
pub mod tensor_file;

pub use commands::{run, Cli, Outcome};
