use std::path::{Path, PathBuf};

use loocluster_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("rate fit needs at least 3 cells with positive loss, got {usable} (zero-loss cells excluded: {excluded:?})")]
    InsufficientData {
        usable: usize,
        excluded: Vec<String>,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status: 1 for I/O, 2 for invalid input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } | HarnessError::Csv { .. } => 1,
            HarnessError::Core(CoreError::NumericalFailure(_)) => 3,
            HarnessError::Parse { .. }
            | HarnessError::Config(_)
            | HarnessError::InsufficientData { .. }
            | HarnessError::Core(_) => 2,
        }
    }
}
