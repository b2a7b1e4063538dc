//! The `diffwalker` command line: argument parsing, run recording and the
//! command implementations behind the binary.

pub mod args;
pub mod error;
pub mod run;

pub use args::{Cli, Command, Job, RunConfig};
pub use error::{CliError, CliResult};
pub use run::{execute, run_job};
