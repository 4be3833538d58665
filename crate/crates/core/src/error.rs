use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed input file or text. `line` is 1-based when known.
    #[error("{}{}: {msg}", path.as_ref().map(|p| format!("{}", p.display())).unwrap_or_else(|| "<input>".into()), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: Option<PathBuf>,
        line: Option<usize>,
        msg: String,
    },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn format_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to a format error that does not have one yet.
    pub fn with_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Format {
                path: None,
                line,
                msg,
            } => Error::Format {
                path: Some(p.into()),
                line,
                msg,
            },
            other => other,
        }
    }

    /// True for errors caused by bad input data or files rather than bad arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
