use std::path::PathBuf;

use kernorm_core::ErrorKind;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Ingest {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A trial failed; `seed` replays it.
    #[error("{method} failed at n = {n} (trial seed {seed}): {source}")]
    Trial {
        method: &'static str,
        n: usize,
        seed: u64,
        #[source]
        source: kernorm_core::Error,
    },

    #[error(transparent)]
    Core(#[from] kernorm_core::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Ingest { .. } | HarnessError::Read { .. } => 3,
            HarnessError::Io { .. } => 1,
            HarnessError::Trial { source, .. } | HarnessError::Core(source) => match source.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Input | ErrorKind::Numeric => 4,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
