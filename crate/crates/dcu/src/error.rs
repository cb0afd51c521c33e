use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    /// Parse or validation failure anchored at a line of an input file.
    #[error("{}:{line}: {message}", path.display())]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}:{line}: unknown catalogue tag `{tag}`", path.display())]
    UnknownTag { path: PathBuf, line: usize, tag: String },
    /// A numerical failure inside one of the library modules.
    #[error("{module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: dcu_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Manifest(String),
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::UnknownTag { .. } => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io { .. } | RunError::Manifest(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Tags a core error with the module it came from.
pub(crate) trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T, RunError>;
}

impl<T> InModule<T> for dcu_core::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Numerical { module, source })
    }
}
