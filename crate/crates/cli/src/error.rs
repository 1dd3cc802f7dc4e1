use std::io;
use std::path::{Path, PathBuf};

use robust_pll_core::pll::EpochRecord;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Errors surfaced by file formats and commands. Each maps to a process exit
/// code: 2 for configuration, 3 for data and IO, 4 for training failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    /// Malformed binary or text file; `offset` is a byte offset for binary
    /// formats and a 1-based line number for text formats.
    #[error("{path}: bad format at {unit} {offset}: {reason}")]
    Format {
        path: String,
        unit: &'static str,
        offset: u64,
        reason: String,
    },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("training failed: {message}")]
    Training { message: String, trace: Vec<EpochRecord> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Format { .. } | CliError::Io { .. } => 3,
            CliError::Training { .. } => 4,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<robust_pll_core::Error> for CliError {
    fn from(e: robust_pll_core::Error) -> Self {
        use robust_pll_core::Error as E;
        let message = e.to_string();
        match e {
            E::Config(m) => CliError::Config(m),
            E::Training { trace, .. } => CliError::Training { message, trace },
            _ => CliError::Data(message),
        }
    }
}
