use std::fmt;
use std::path::{Path, PathBuf};

pub enum CliError {
    Engine(itslcc::Error),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad input or usage, 2 for file system failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(e) if e.is_io() => 2,
            CliError::Io { .. } => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Engine(e) if e.is_io() => "io",
            CliError::Io { .. } => "io",
            CliError::Engine(_) => "validation",
            CliError::Usage(_) => "usage",
        }
    }
}

impl From<itslcc::Error> for CliError {
    fn from(e: itslcc::Error) -> Self {
        CliError::Engine(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Engine(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}
