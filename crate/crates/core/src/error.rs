use std::path::PathBuf;

/// Errors produced by the detection toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape error in {layer}: {message}")]
    Shape { layer: String, message: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("config error on \"{key}\": {message}")]
    Config { key: String, message: String },

    #[error("label parse error at line {line}: {message}")]
    Label { line: usize, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(
        "non-finite {term} loss at epoch {epoch}, batch {batch} (total {total})"
    )]
    NonFinite {
        epoch: usize,
        batch: usize,
        term: &'static str,
        total: f64,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(layer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Shape {
            layer: layer.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the filesystem rather than by invalid input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::MissingFiles(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
