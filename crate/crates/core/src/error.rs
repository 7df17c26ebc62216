use std::io;

/// Errors raised across the raster, network, detection and evaluation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Malformed file content (headers, CSV columns, unparsable rows).
    #[error("format error: {0}")]
    Format(String),
    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A derived quantity fell outside its admissible range.
    #[error("out of range: {0}")]
    Range(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Self::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Self::Format(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Self::Numeric(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(e) => Self::Io(e),
                other => Self::Format(format!("{other:?}")),
            }
        } else {
            Self::Format(err.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            Self::Io(io::Error::other(err))
        } else {
            Self::Format(err.to_string())
        }
    }
}
