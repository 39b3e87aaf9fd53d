//! Command-line front end for `markov-sampler`.

pub mod args;
pub mod commands;
pub mod error;
pub mod files;
pub mod report;

pub use args::{Cli, Command, ProblemChoice, RunConfig};
pub use error::CliError;
