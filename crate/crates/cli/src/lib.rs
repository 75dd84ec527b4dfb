//! Command-line companion to the core library: file formats, caches,
//! and the five commands.

pub mod archive;
pub mod backbone;
pub mod checkpoint;
pub mod commands;
pub mod configio;
pub mod corpusio;
pub mod embcache;
pub mod error;
pub mod imageio;

use clap::Parser;

pub use error::{CliError, Result};

/// Parse the process arguments, run the selected command, and map the
/// outcome to an exit code: 0 success, 1 runtime failure, 2 bad
/// configuration.
pub fn run() -> i32 {
    let cli = commands::Cli::parse();
    run_parsed(cli)
}

/// Same as [`run`] but over explicit arguments, for tests driving the
/// binary in-process. The first element is the program name.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match commands::Cli::try_parse_from(args) {
        Ok(cli) => run_parsed(cli),
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            0
        }
        Err(e) => {
            eprint!("{e}");
            2
        }
    }
}

fn run_parsed(cli: commands::Cli) -> i32 {
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
