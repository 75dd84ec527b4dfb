use std::fmt;

/// Command failures split by exit code: configuration problems exit
/// with 2 and name the offending field, everything else exits with 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<entcap_core::CoreError> for CliError {
    fn from(err: entcap_core::CoreError) -> Self {
        match err {
            entcap_core::CoreError::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Attach the file path to an I/O failure.
pub fn io_error(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {err}", path.display()))
}
