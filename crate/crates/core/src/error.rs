use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero vector cannot be normalized (norm {norm:e})")]
    ZeroVector { norm: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no support shot contains class {class}")]
    EmptyClassMask { class: u16 },

    #[error("no support image contains a background pixel")]
    EmptyBackground,

    #[error("split has {available} eligible classes, episode needs {requested}")]
    InsufficientClasses { available: usize, requested: usize },

    #[error("class {class} has {available} eligible images, episode needs {requested}")]
    InsufficientImages {
        class: u16,
        available: usize,
        requested: usize,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("no foreground class with a non-empty union")]
    NoForeground,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::ZeroVector { .. } | Error::NoForeground => 4,
            Error::ShapeMismatch(_)
            | Error::EmptyClassMask { .. }
            | Error::EmptyBackground
            | Error::InsufficientClasses { .. }
            | Error::InsufficientImages { .. }
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Json { .. } => 3,
        }
    }
}
