use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("i/o error on {path}: {source}")]
    IoAt {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    /// More than half of the data rows in an input could not be parsed.
    #[error("format error: {malformed} of {total} rows malformed")]
    Format { malformed: usize, total: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Fewer vehicles survived the activity filters than users requested.
    #[error("user selection: requested {requested} users but only {available} vehicles survived the filters")]
    Selection { requested: usize, available: usize },

    #[error("resource level {level} outside [1, {max}]")]
    LevelOutOfRange { level: u32, max: u32 },

    #[error("cannot normalize an empty column")]
    EmptyColumn,

    #[error("triple (uid {0}, eid {1}, sid {2}) was not part of the fitted perturbation set")]
    UnknownTriple(u32, u32, u32),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io_at(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoAt {
            path: path.into(),
            source,
        }
    }
}
