use std::path::PathBuf;

/// Crate-wide error type. Variants map onto the CLI exit-code classes via
/// [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing file {}: {hint}", path.display())]
    MissingFile { path: PathBuf, hint: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("embedding file {}, line {line}: {message}", path.display())]
    Embedding {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("weight transfer failed for tensor `{name}`: {message}")]
    Transfer { name: String, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MissingFile { .. } | Error::Transfer { .. } => 2,
            Error::Io { .. }
            | Error::Json { .. }
            | Error::Data(_)
            | Error::Embedding { .. }
            | Error::Checkpoint(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
