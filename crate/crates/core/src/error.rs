use std::path::PathBuf;

/// Errors produced by the mapping engine, file readers and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("metric mismatch: expected {expected:?}, got {got:?}")]
    Metric {
        expected: crate::descriptor::Metric,
        got: crate::descriptor::Metric,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{}format error at byte {offset}: {message}", path_prefix(.path))]
    Format {
        path: Option<PathBuf>,
        offset: u64,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    Size { width: usize, height: usize, min: usize },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn path_prefix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to a format error that was raised while decoding bytes.
    pub fn with_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Format { offset, message, .. } => Error::Format {
                path: Some(p.into()),
                offset,
                message,
            },
            other => other,
        }
    }

    /// True for malformed input files and inconsistent data.
    pub fn is_data_format(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Data(_))
    }

    /// True for invalid user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
