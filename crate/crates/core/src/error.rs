use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("pixel ({col}, {row}) outside {width}x{height} raster")]
    Index {
        col: i64,
        row: i64,
        width: usize,
        height: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error in {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("corrupt data file {}: expected {expected} bytes, found {actual}", path.display())]
    Corruption { path: PathBuf, expected: u64, actual: u64 },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("no usable training samples: {0}")]
    EmptyTraining(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("sampling error: {0}")]
    Sampling(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for failures of the filesystem rather than of the inputs' content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
