use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: unreadable audio: {msg}", path.display())]
    UnreadableAudio { path: PathBuf, msg: String },

    #[error("{}: unsupported encoding: {msg}", path.display())]
    UnsupportedEncoding { path: PathBuf, msg: String },

    #[error("{}: zero-length audio", path.display())]
    EmptyAudio { path: PathBuf },

    #[error("clip `{0}` is all zeros, no gain applied")]
    SilentClip(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("class starvation: {0}")]
    ClassStarvation(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::NonFinite(_) | Error::Shape(_) => 3,
            _ => 2,
        }
    }
}
